#pragma once

// Umbrella header.

#include "bola/error.hpp"
#include "bola/manifest_io.hpp"
#include "bola/metrics.hpp"
#include "bola/model.hpp"
#include "bola/oracle.hpp"
#include "bola/policy.hpp"
#include "bola/simulator.hpp"
#include "bola/trace.hpp"
#include "bola/traces.hpp"
