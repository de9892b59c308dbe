// JSON wire format for processes.
//
// Document layout (observation block present only for POMDPs):
//   {
//     "n_states": int, "n_actions": int, "gamma": real, "initial_state": int,
//     "kernel": [[s, a, s', r, p], ...],
//     "obs_matrix": [[s, o, p], ...]
//   }
// Probabilities and rewards are emitted as shortest round-trip decimal
// literals, so parse(dump(x)) reproduces every double bit for bit. Zero
// entries are omitted; the observation count is the highest observation
// index appearing in obs_matrix plus one.
#pragma once

#include <filesystem>
#include <json.hpp>

#include "dwm/mdp.hpp"

namespace dwm {

using Json = nlohmann::json;

Json to_json(const TabularMdp& mdp);
Json to_json(const TabularPomdp& pomdp);

TabularMdp mdp_from_json(const Json& doc);
TabularPomdp pomdp_from_json(const Json& doc);

void save_json(const Json& doc, const std::filesystem::path& path);
Json load_json(const std::filesystem::path& path);

}  // namespace dwm
