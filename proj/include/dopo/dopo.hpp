#pragma once
// ============================================================================
// Umbrella header: linearized quantum fluctuations of the DOPO bright cavity
// soliton — model, soliton profile, linearized operators and eigensystem,
// squeezing/intensity spectra, local-oscillator functions, stochastic oracle,
// and the CLI command layer.
// ============================================================================

#include "dopo/core.hpp"
#include "dopo/soliton.hpp"
#include "dopo/linop.hpp"
#include "dopo/spectra.hpp"
#include "dopo/lof.hpp"
#include "dopo/oracle.hpp"
#include "dopo/csv.hpp"
#include "dopo/config.hpp"
#include "dopo/cli.hpp"
