#pragma once

// Umbrella header for the whole library.

#include "sensordrop/error.hpp"
#include "sensordrop/rng.hpp"
#include "sensordrop/tensor.hpp"
#include "sensordrop/layers.hpp"
#include "sensordrop/network.hpp"
#include "sensordrop/optimizer.hpp"
#include "sensordrop/gradcheck.hpp"
#include "sensordrop/binary_io.hpp"
#include "sensordrop/checkpoint.hpp"
#include "sensordrop/scene.hpp"
#include "sensordrop/dataset_io.hpp"
#include "sensordrop/environment.hpp"
#include "sensordrop/reward.hpp"
#include "sensordrop/policy.hpp"
#include "sensordrop/a2c.hpp"
#include "sensordrop/config.hpp"
#include "sensordrop/report.hpp"
#include "sensordrop/experiment.hpp"
