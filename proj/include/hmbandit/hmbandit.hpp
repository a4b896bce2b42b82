#pragma once

#include "hmbandit/arm_model.hpp"
#include "hmbandit/config.hpp"
#include "hmbandit/error.hpp"
#include "hmbandit/index.hpp"
#include "hmbandit/io.hpp"
#include "hmbandit/simulator.hpp"
#include "hmbandit/value_iteration.hpp"
