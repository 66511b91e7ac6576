#pragma once

#include <string>
#include <vector>

#include "popgo/model.hpp"
#include "popgo/shortcut.hpp"

namespace popgo {

// Binary checkpoint: magic, version, arch, layer count, score kind and table
// shapes in a fixed-width little-endian header, then both tables row-major as
// 32-bit floats. A key=value manifest is written next to it.
void save_model(const std::string& path, const Model& m,
                const std::string& manifest_name = "model_manifest.txt");

// The propagation graph is not stored; for LightGCN the caller rebuilds it
// from the train split and attaches it.
Model load_model(const std::string& path);

// frequency<TAB>category, one line per vocabulary entry
void save_pop_vocab(const std::string& path, const std::vector<int>& freq_values);
std::vector<int> load_pop_vocab(const std::string& path);

// shortcut.ckpt + user_pop_vocab.txt + item_pop_vocab.txt under dir
void save_shortcut(const std::string& dir, const ShortcutModel& sm);

// Vocabularies come from the saved files; per-entity counts are recomputed
// from the train split (unseen counts fall back to the nearest category).
ShortcutModel load_shortcut(const std::string& dir, const std::vector<Interaction>& train,
                            int n_users, int n_items,
                            const NormalizedAdjacency* graph = nullptr);

}  // namespace popgo
