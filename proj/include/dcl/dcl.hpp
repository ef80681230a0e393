// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dcl/clifford.hpp"
#include "dcl/closed_form.hpp"
#include "dcl/energy.hpp"
#include "dcl/errors.hpp"
#include "dcl/fft.hpp"
#include "dcl/grid.hpp"
#include "dcl/solver.hpp"
#include "dcl/spectral.hpp"
