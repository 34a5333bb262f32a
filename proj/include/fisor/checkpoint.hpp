#ifndef FISOR_CHECKPOINT_HPP
#define FISOR_CHECKPOINT_HPP

#include <optional>
#include <string>

#include "fisor/mlp.hpp"
#include "fisor/optim.hpp"

#include "json.hpp"

namespace fisor {

// Checkpoint file: magic, u32 header length, JSON header (architecture,
// step, seed, optimizer hyperparameters, caller extras), then little-endian
// float64 parameter blob (per layer: weights then biases), then the Adam
// moment blobs when present.
struct Checkpoint {
  Mlp net;
  std::optional<AdamState> adam;
  nlohmann::json header;
};

void save_checkpoint(const std::string& path, const Mlp& net, const AdamState* adam,
                     std::uint64_t step, std::uint64_t seed,
                     const nlohmann::json& extras = nlohmann::json::object());

Checkpoint load_checkpoint(const std::string& path);

}  // namespace fisor

#endif
