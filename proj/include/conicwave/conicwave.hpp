#pragma once

// Umbrella header.

#include "conicwave/common.hpp"
#include "conicwave/expr.hpp"
#include "conicwave/manifold.hpp"
#include "conicwave/compactified.hpp"
#include "conicwave/geodesic.hpp"
#include "conicwave/normal_form.hpp"
#include "conicwave/grid.hpp"
#include "conicwave/hamiltonian.hpp"
#include "conicwave/phase_provider.hpp"
#include "conicwave/cutoffs.hpp"
#include "conicwave/lsio.hpp"
#include "conicwave/norms.hpp"
#include "conicwave/duhamel.hpp"
#include "conicwave/report.hpp"
#include "conicwave/io.hpp"
#include "conicwave/specfile.hpp"
#include "conicwave/scenarios.hpp"
