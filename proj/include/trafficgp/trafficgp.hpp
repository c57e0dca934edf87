#pragma once

// Umbrella header.

#include "trafficgp/errors.hpp"
#include "trafficgp/dataset.hpp"
#include "trafficgp/kernel.hpp"
#include "trafficgp/optimize.hpp"
#include "trafficgp/gp.hpp"
#include "trafficgp/admm.hpp"
#include "trafficgp/fusion.hpp"
#include "trafficgp/traffic.hpp"
#include "trafficgp/benchmark.hpp"
#include "trafficgp/serialize.hpp"
#include "trafficgp/protocol.hpp"
#include "trafficgp/net.hpp"
#include "trafficgp/cluster.hpp"
