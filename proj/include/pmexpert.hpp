#ifndef PMEXPERT_HPP
#define PMEXPERT_HPP

#include "pmexpert/class_network.hpp"
#include "pmexpert/environment.hpp"
#include "pmexpert/error.hpp"
#include "pmexpert/evaluation.hpp"
#include "pmexpert/experiment.hpp"
#include "pmexpert/feedback.hpp"
#include "pmexpert/learner.hpp"
#include "pmexpert/oracle.hpp"
#include "pmexpert/random.hpp"
#include "pmexpert/validation.hpp"

#endif  // PMEXPERT_HPP
