#include "usm/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace usm {

const FieldDef& FeatureSchema::field(const std::string& name) const {
  for (const auto& f : fields)
    if (f.name == name) return f;
  throw std::invalid_argument("unknown feature: " + name);
}

bool FeatureSchema::has(const std::string& name) const {
  return std::any_of(fields.begin(), fields.end(),
                     [&](const FieldDef& f) { return f.name == name; });
}

FeatureSchema FeatureSchema::standard(int n_language, int n_region,
                                      int n_device) {
  FeatureSchema s;
  s.fields = {{"language", n_language, true},
              {"region", n_region, true},
              {"device", n_device, true},
              {"activity", 1, false},
              {"submit_history", 1, false},
              {"exposure_index", 1, false}};
  return s;
}

const FeatureLayout::Slot& FeatureLayout::slot(const std::string& name) const {
  for (const auto& s : slots)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown feature: " + name);
}

bool FeatureLayout::has(const std::string& name) const {
  return std::any_of(slots.begin(), slots.end(),
                     [&](const Slot& s) { return s.name == name; });
}

FeatureLayout make_layout(const FeatureSchema& schema,
                          std::span<const std::string> field_names) {
  FeatureLayout layout;
  int offset = 0;
  for (const auto& name : field_names) {
    const FieldDef& f = schema.field(name);
    layout.slots.push_back({f.name, offset, f.width, f.one_hot});
    offset += f.width;
  }
  layout.dim = offset;
  return layout;
}

void encode_attrs(const FeatureLayout& layout, const Attrs& attrs,
                  Vec& out_raw) {
  out_raw.assign(static_cast<std::size_t>(layout.dim), 0.0);
  for (const auto& slot : layout.slots) {
    if (slot.one_hot) {
      int code = 0;
      if (slot.name == "language")
        code = attrs.language;
      else if (slot.name == "region")
        code = attrs.region;
      else if (slot.name == "device")
        code = attrs.device;
      else
        throw std::invalid_argument("unencodable categorical: " + slot.name);
      code = std::clamp(code, 0, slot.width - 1);
      out_raw[static_cast<std::size_t>(slot.offset + code)] = 1.0;
    } else if (slot.name == "activity") {
      out_raw[static_cast<std::size_t>(slot.offset)] = attrs.activity;
    } else if (slot.name == "submit_history") {
      out_raw[static_cast<std::size_t>(slot.offset)] =
          std::log1p(static_cast<double>(attrs.submit_history));
    } else if (slot.name == "exposure_index") {
      out_raw[static_cast<std::size_t>(slot.offset)] =
          std::log1p(static_cast<double>(attrs.exposure_index));
    } else {
      throw std::invalid_argument("unencodable feature: " + slot.name);
    }
  }
}

}  // namespace usm
