#pragma once

#include "fedmeta/config.hpp"
#include "fedmeta/cost_model.hpp"
#include "fedmeta/csv.hpp"
#include "fedmeta/error.hpp"
#include "fedmeta/evaluation.hpp"
#include "fedmeta/experiment.hpp"
#include "fedmeta/idx.hpp"
#include "fedmeta/imaml.hpp"
#include "fedmeta/meta_backward.hpp"
#include "fedmeta/nn.hpp"
#include "fedmeta/param_vector.hpp"
#include "fedmeta/projection.hpp"
#include "fedmeta/random.hpp"
#include "fedmeta/svg.hpp"
#include "fedmeta/tasks.hpp"
