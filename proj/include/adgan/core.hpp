#pragma once

#include "adgan/core/conv.hpp"
#include "adgan/core/gradcheck.hpp"
#include "adgan/core/ops.hpp"
#include "adgan/core/rng.hpp"
#include "adgan/core/tensor.hpp"
