#pragma once

#include "drr/common.hpp"
#include "drr/dataset.hpp"
#include "drr/drr.hpp"
#include "drr/eval.hpp"
#include "drr/krr.hpp"
#include "drr/manifolds.hpp"
#include "drr/model.hpp"
#include "drr/pca.hpp"
#include "drr/persistence.hpp"
#include "drr/ppa.hpp"
