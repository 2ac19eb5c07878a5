#include "samswin/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "samswin/config.hpp"

namespace samswin {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'W', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormatVersion = 1;

void write_u64(std::ostream& o, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  o.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  check(in.gcount() == 8, "checkpoint: truncated header");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

struct Parsed {
  Json header;
  std::vector<std::pair<std::string, Shape>> entries;
  std::vector<std::vector<double>> data;
};

Parsed read_archive(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  check(f.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0,
        "checkpoint: bad magic in " + path);
  uint64_t hlen = read_u64(f);
  std::string htxt(hlen, '\0');
  f.read(htxt.data(), static_cast<std::streamsize>(hlen));
  check(f.gcount() == static_cast<std::streamsize>(hlen), "checkpoint: truncated manifest");
  Parsed p;
  try {
    p.header = Json::parse(htxt);
  } catch (const std::exception& e) {
    throw Error(std::string("checkpoint: manifest parse error: ") + e.what());
  }
  check(p.header.value("format_version", -1) == kFormatVersion,
        "checkpoint: unsupported format version in " + path);
  for (const auto& e : p.header.at("params")) {
    Shape s = e.at("shape").get<Shape>();
    p.entries.emplace_back(e.at("name").get<std::string>(), s);
    std::vector<double> buf(static_cast<size_t>(shape_numel(s)));
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(double)));
    check(f.gcount() == static_cast<std::streamsize>(buf.size() * sizeof(double)),
          "checkpoint: truncated tensor data for " + p.entries.back().first);
    p.data.push_back(std::move(buf));
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const SamSwinModel& model,
                     const CheckpointMeta& meta) {
  const ParamStore& ps = model.params();
  Json params_json = Json::array();
  for (int i = 0; i < ps.count(); ++i) {
    params_json.push_back(
        Json{{"name", ps.name(i)}, {"shape", ps.tensors()[static_cast<size_t>(i)].shape()}});
  }
  Json header{{"format_version", kFormatVersion},
              {"code_version", meta.code_version.empty() ? kVersion : meta.code_version},
              {"model", model_config_to_json(meta.model)},
              {"variant", meta.variant},
              {"stage", meta.stage},
              {"seed", meta.seed},
              {"params", params_json}};
  std::string htxt = header.dump();

  std::ofstream f(path, std::ios::binary);
  check(f.good(), "cannot write checkpoint: " + path);
  f.write(kMagic, 8);
  write_u64(f, htxt.size());
  f.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
  for (const auto& t : ps.tensors())
    f.write(reinterpret_cast<const char*>(t.value().data()),
            static_cast<std::streamsize>(t.value().size() * sizeof(double)));
  check(f.good(), "checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Parsed p = read_archive(path);
  LoadedCheckpoint out;
  out.meta.model = model_config_from_json(p.header.at("model"));
  out.meta.variant = p.header.value("variant", "M5");
  out.meta.stage = p.header.value("stage", 1);
  out.meta.seed = p.header.value("seed", static_cast<uint64_t>(0));
  out.meta.code_version = p.header.value("code_version", "");
  out.model = std::make_unique<SamSwinModel>(out.meta.model);
  ParamStore& ps = out.model->params();
  check(static_cast<size_t>(ps.count()) == p.entries.size(),
        "checkpoint: parameter count mismatch for " + path);
  for (size_t i = 0; i < p.entries.size(); ++i) {
    Tensor& t = ps.tensors()[i];
    check(ps.name(static_cast<int>(i)) == p.entries[i].first,
          "checkpoint: parameter order mismatch at " + p.entries[i].first);
    check(t.shape() == p.entries[i].second,
          "checkpoint: shape mismatch for " + p.entries[i].first);
    t.raw_value() = std::move(p.data[i]);
  }
  return out;
}

int load_matching_weights(SamSwinModel& model, const std::string& path) {
  Parsed p = read_archive(path);
  ParamStore& ps = model.params();
  int loaded = 0;
  for (size_t i = 0; i < p.entries.size(); ++i) {
    Tensor* t = ps.find(p.entries[i].first);
    if (!t || t->shape() != p.entries[i].second) continue;
    t->raw_value() = std::move(p.data[i]);
    ++loaded;
  }
  return loaded;
}

}  // namespace samswin
