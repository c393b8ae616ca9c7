// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ftmp/numcore/adam.hpp"
#include "ftmp/numcore/grad_check.hpp"
#include "ftmp/numcore/gru.hpp"
#include "ftmp/numcore/linear.hpp"
#include "ftmp/numcore/softmax.hpp"
#include "ftmp/numcore/tensor.hpp"
