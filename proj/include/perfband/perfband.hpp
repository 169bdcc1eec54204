#pragma once

// Floquet-Bloch band structures of -Delta + V on a periodically perforated plane.

#include "perfband/errors.hpp"
#include "perfband/geometry.hpp"
#include "perfband/potential.hpp"
#include "perfband/grid.hpp"
#include "perfband/assembly.hpp"
#include "perfband/multipliers.hpp"
#include "perfband/eigensolver.hpp"
#include "perfband/bands.hpp"
#include "perfband/thomas.hpp"
#include "perfband/diagnostics.hpp"
#include "perfband/config.hpp"
#include "perfband/io.hpp"
