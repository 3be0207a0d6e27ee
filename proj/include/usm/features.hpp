#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "usm/matrix.hpp"

namespace usm {

// Observable attributes carried by every impression. Categorical codes are
// one-hot encoded; numeric fields pass through (the counters are
// log1p-compressed). exposure_index counts prior impressions, so together
// with submit_history it encodes the user's running submission rate.
struct Attrs {
  int language = 0;
  int region = 0;
  int device = 0;
  double activity = 0.0;
  int submit_history = 0;
  int exposure_index = 0;
};

struct FieldDef {
  std::string name;
  int width = 1;
  bool one_hot = false;
};

struct FeatureSchema {
  std::vector<FieldDef> fields;

  const FieldDef& field(const std::string& name) const;
  bool has(const std::string& name) const;

  // language/region/device one-hot plus activity and submit_history
  static FeatureSchema standard(int n_language, int n_region, int n_device);
};

// Fixed-order slices of the dense raw block for one model.
struct FeatureLayout {
  struct Slot {
    std::string name;
    int offset = 0;
    int width = 0;
    bool one_hot = false;
  };
  std::vector<Slot> slots;
  int dim = 0;

  const Slot& slot(const std::string& name) const;
  bool has(const std::string& name) const;
};

FeatureLayout make_layout(const FeatureSchema& schema,
                          std::span<const std::string> field_names);

// One (user, item, author) example: ids for embedding lookup plus the
// model's dense raw block.
struct FeatureVector {
  std::uint64_t user_id = 0;
  std::uint64_t item_id = 0;
  std::uint64_t author_id = 0;
  Vec raw;
};

void encode_attrs(const FeatureLayout& layout, const Attrs& attrs,
                  Vec& out_raw);

}  // namespace usm
