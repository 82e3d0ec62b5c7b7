#ifndef WARP_WARP_HPP_
#define WARP_WARP_HPP_

#include "warp/arch.hpp"
#include "warp/checkpoint.hpp"
#include "warp/config.hpp"
#include "warp/data.hpp"
#include "warp/diagnostics.hpp"
#include "warp/error.hpp"
#include "warp/io.hpp"
#include "warp/merge_ops.hpp"
#include "warp/optimizer.hpp"
#include "warp/orchestrator.hpp"
#include "warp/parallel.hpp"
#include "warp/policy_net.hpp"
#include "warp/reward_model.hpp"
#include "warp/rl_trainer.hpp"
#include "warp/rng.hpp"
#include "warp/rollout.hpp"
#include "warp/sft.hpp"
#include "warp/stats.hpp"
#include "warp/tensor_store.hpp"

#endif  // WARP_WARP_HPP_
