#pragma once

#include "iccbf/autodiff.hpp"
#include "iccbf/barrier.hpp"
#include "iccbf/config.hpp"
#include "iccbf/dynamics.hpp"
#include "iccbf/env.hpp"
#include "iccbf/harness.hpp"
#include "iccbf/iccbf_chain.hpp"
#include "iccbf/inspection_env.hpp"
#include "iccbf/mlp.hpp"
#include "iccbf/params.hpp"
#include "iccbf/ppo.hpp"
#include "iccbf/qp.hpp"
#include "iccbf/qp_assembly.hpp"
#include "iccbf/qp_oracle.hpp"
#include "iccbf/scenarios.hpp"
#include "iccbf/small_vec.hpp"
