#pragma once

#include "etac/error.hpp"
#include "etac/numerics.hpp"
#include "etac/faults.hpp"
#include "etac/topology.hpp"
#include "etac/triggers.hpp"
#include "etac/synthesis.hpp"
#include "etac/runtime.hpp"
#include "etac/simulator.hpp"
#include "etac/analysis.hpp"
#include "etac/preset.hpp"
#include "etac/io.hpp"
