// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hif8/calibration.hpp"
#include "hif8/codec.hpp"
#include "hif8/error.hpp"
#include "hif8/io.hpp"
#include "hif8/reference_formats.hpp"
#include "hif8/rounding.hpp"
#include "hif8/scaling.hpp"
#include "hif8/source_format.hpp"
#include "hif8/tensorops.hpp"
