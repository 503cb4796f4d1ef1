#include "cdn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cdn/error.hpp"
#include "json.hpp"

namespace cdn::train {

namespace {

constexpr char kMagic[8] = {'C', 'D', 'N', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_matrix(std::ostream& out, const nn::Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ConfigError("cannot open checkpoint " + path.string());
  }

  void read(void* dst, std::size_t bytes, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (in_.gcount() != static_cast<std::streamsize>(bytes)) fail(what, "truncated");
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v = 0;
    read(&v, sizeof v, what);
    return v;
  }
  void matrix(nn::Matrix& m, const char* what) {
    read(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), what);
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw DataError(path_.string(), 0, field, what);
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

Checkpoint Checkpoint::fresh(const TrainConfig& config) {
  config.validate();
  Checkpoint c;
  c.config = config;
  c.model = std::make_unique<model::CdnModel>(config.model, config.seed);
  c.optimizer = std::make_unique<AdamW>(c.model->parameters(),
                                        AdamOptions{.weight_decay = config.weight_decay});
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  using nlohmann::json;
  const auto& entries = ckpt.model->parameters().entries();
  json params = json::array();
  for (const auto& e : entries) {
    params.push_back({{"name", e.name}, {"rows", e.var.rows()}, {"cols", e.var.cols()}});
  }
  const json meta = {{"config", json::parse(to_json(ckpt.config))},
                     {"fingerprint", ckpt.config.model_fingerprint()},
                     {"epoch", ckpt.epoch},
                     {"phase", phase_name(ckpt.phase)},
                     {"optimizer_steps", ckpt.optimizer->steps()},
                     {"parameters", params}};
  const std::string text = meta.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : entries) write_matrix(out, e.var.value());
    for (const auto& m : ckpt.optimizer->first_moments()) write_matrix(out, m);
    for (const auto& v : ckpt.optimizer->second_moments()) write_matrix(out, v);
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  using nlohmann::json;
  Reader in(path);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) in.fail("magic", "not a checkpoint file");
  const std::uint64_t len = in.u64("metadata length");
  if (len > (1u << 26)) in.fail("metadata length", "implausible size");
  std::string text(len, '\0');
  in.read(text.data(), len, "metadata");

  json meta;
  try {
    meta = json::parse(text);
  } catch (const json::parse_error& e) {
    in.fail("metadata", e.what());
  }

  Checkpoint c;
  std::string phase;
  try {
    c.config = parse_config(meta.at("config").dump(), path.string());
    if (meta.at("fingerprint").get<std::string>() != c.config.model_fingerprint()) {
      in.fail("fingerprint", "does not match the stored model config");
    }
    c.epoch = meta.at("epoch").get<int>();
    phase = meta.at("phase").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    in.fail("metadata", e.what());
  }
  if (phase == "main") c.phase = Phase::kMain;
  else if (phase == "decouple") c.phase = Phase::kDecouple;
  else in.fail("phase", "unknown phase '" + phase + "'");

  Checkpoint built = Checkpoint::fresh(c.config);
  built.epoch = c.epoch;
  built.phase = c.phase;

  auto& store = built.model->parameters();
  const auto& entries = store.entries();
  const json& params = meta.at("parameters");
  if (!params.is_array() || params.size() != entries.size()) {
    in.fail("parameters", "parameter list does not match the model");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& p = params[i];
    if (p.at("name").get<std::string>() != entries[i].name ||
        p.at("rows").get<Eigen::Index>() != entries[i].var.rows() ||
        p.at("cols").get<Eigen::Index>() != entries[i].var.cols()) {
      in.fail("parameters[" + std::to_string(i) + "]", "does not match the model");
    }
  }
  for (const auto& e : entries) in.matrix(e.var.node()->value, "parameter data");
  for (auto& m : built.optimizer->first_moments()) in.matrix(m, "optimizer state");
  for (auto& v : built.optimizer->second_moments()) in.matrix(v, "optimizer state");
  built.optimizer->set_steps(meta.at("optimizer_steps").get<std::int64_t>());
  if (!in.at_end()) in.fail("data", "trailing bytes");
  return built;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected) {
  Checkpoint c = load_checkpoint(path);
  const auto want = expected.model_fingerprint();
  const auto have = c.config.model_fingerprint();
  if (want != have) {
    throw ConfigError("checkpoint " + path.string() + " has model fingerprint " + have +
                      " but the config describes " + want);
  }
  c.config = expected;
  return c;
}

}  // namespace cdn::train
