#include "usm/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace usm {

namespace {

constexpr std::uint32_t kMagic = 0x314D5355;  // "USM1"
constexpr std::uint32_t kVersion = 1;

struct SerializeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw SerializeError("truncated model file");
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw SerializeError("truncated model file");
  return v;
}
std::string read_str(std::istream& in) {
  const auto len = read_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw SerializeError("truncated model file");
  return s;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

nlohmann::json config_to_json(const SurveyModelConfig& cfg) {
  nlohmann::json j;
  j["backbone_dims"] = cfg.backbone_dims;
  j["head_dims"] = cfg.head_dims;
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& h : cfg.heads)
    heads.push_back({{"name", h.name}, {"kind", h.kind}, {"option", h.option}});
  j["heads"] = heads;
  j["use_lhuc"] = cfg.use_lhuc;
  j["use_se"] = cfg.use_se;
  j["se_reduction"] = cfg.se_reduction;
  j["features"] = cfg.features;
  j["lhuc_features"] = cfg.lhuc_features;
  j["embedding_dim"] = cfg.embedding_dim;
  j["hash_bits"] = cfg.hash_bits;
  return j;
}

SurveyModelConfig config_from_json(const nlohmann::json& j) {
  SurveyModelConfig cfg;
  cfg.backbone_dims = j.at("backbone_dims").get<std::vector<int>>();
  cfg.head_dims = j.at("head_dims").get<std::vector<int>>();
  cfg.heads.clear();
  for (const auto& h : j.at("heads")) {
    cfg.heads.push_back({h.at("name").get<std::string>(),
                         h.at("kind").get<std::string>(),
                         h.at("option").get<std::string>()});
  }
  cfg.use_lhuc = j.at("use_lhuc").get<bool>();
  cfg.use_se = j.at("use_se").get<bool>();
  cfg.se_reduction = j.at("se_reduction").get<int>();
  cfg.features = j.at("features").get<std::vector<std::string>>();
  cfg.lhuc_features = j.at("lhuc_features").get<std::vector<std::string>>();
  cfg.embedding_dim = j.at("embedding_dim").get<int>();
  cfg.hash_bits = j.at("hash_bits").get<int>();
  return cfg;
}

nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : schema.fields)
    fields.push_back(
        {{"name", f.name}, {"width", f.width}, {"one_hot", f.one_hot}});
  return {{"fields", fields}};
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema s;
  for (const auto& f : j.at("fields")) {
    s.fields.push_back({f.at("name").get<std::string>(),
                        f.at("width").get<int>(),
                        f.at("one_hot").get<bool>()});
  }
  return s;
}

void save_model(const SurveyNet& net, const std::string& kind,
                const std::string& path) {
  nlohmann::json meta;
  meta["kind"] = kind;
  meta["config"] = config_to_json(net.config());
  meta["schema"] = schema_to_json(net.schema());
  nlohmann::json head_names = nlohmann::json::array();
  for (const auto& h : net.config().heads) head_names.push_back(h.name);
  meta["heads"] = head_names;

  auto& params = const_cast<SurveyNet&>(net).params();
  if (ends_with(path, ".json")) {
    nlohmann::json j;
    j["format"] = "usm-model";
    j["version"] = kVersion;
    j["meta"] = meta;
    nlohmann::json tensors;
    SurveyNet::for_each_tensor(
        params, [&](const std::string& name, std::span<double> t) {
          tensors[name] = std::vector<double>(t.begin(), t.end());
        });
    j["tensors"] = tensors;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SerializeError("cannot write " + path);
    out << j.dump(1) << '\n';
    return;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw SerializeError("cannot write " + path);
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_str(out, meta.dump());
  std::uint32_t count = 0;
  SurveyNet::for_each_tensor(
      params, [&](const std::string&, std::span<double>) { ++count; });
  write_u32(out, count);
  SurveyNet::for_each_tensor(
      params, [&](const std::string& name, std::span<double> t) {
        write_str(out, name);
        write_u64(out, t.size());
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
      });
  if (!out) throw SerializeError("write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
  nlohmann::json meta;
  std::vector<std::pair<std::string, std::vector<double>>> tensors;

  if (ends_with(path, ".json")) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SerializeError("cannot read " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "usm-model")
      throw SerializeError("not a model file: " + path);
    if (j.at("version").get<std::uint32_t>() != kVersion)
      throw SerializeError("unsupported model version in " + path);
    meta = j.at("meta");
    for (const auto& [name, data] : j.at("tensors").items())
      tensors.emplace_back(name, data.get<std::vector<double>>());
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SerializeError("cannot read " + path);
    if (read_u32(in) != kMagic)
      throw SerializeError("not a model file: " + path);
    if (read_u32(in) != kVersion)
      throw SerializeError("unsupported model version in " + path);
    meta = nlohmann::json::parse(read_str(in));
    const auto count = read_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = read_str(in);
      const auto n = read_u64(in);
      std::vector<double> data(n);
      in.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
      if (!in) throw SerializeError("truncated model file");
      tensors.emplace_back(std::move(name), std::move(data));
    }
  }

  SurveyModelConfig cfg = config_from_json(meta.at("config"));
  FeatureSchema schema = schema_from_json(meta.at("schema"));
  LoadedModel loaded{meta.at("kind").get<std::string>(),
                     SurveyNet(cfg, schema, 0)};
  std::size_t applied = 0;
  SurveyNet::for_each_tensor(
      loaded.net.params(), [&](const std::string& name, std::span<double> t) {
        for (const auto& [tname, data] : tensors) {
          if (tname != name) continue;
          if (data.size() != t.size())
            throw SerializeError("tensor shape mismatch for " + name);
          std::copy(data.begin(), data.end(), t.begin());
          ++applied;
          return;
        }
        throw SerializeError("missing tensor " + name + " in " + path);
      });
  if (applied != tensors.size())
    throw SerializeError("unexpected extra tensors in " + path);
  return loaded;
}

}  // namespace usm
