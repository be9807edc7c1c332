#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/core.h>

#include "nertag/errors.hpp"
#include "nertag/training.hpp"

namespace nertag::train {
namespace {

constexpr char kMagic[8] = {'N', 'E', 'R', 'T', 'A', 'G', 'C', 'K'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

template <class T>
T parse_number(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError(fmt::format("missing config key '{}'", key));
  T value{};
  const auto& text = it->second;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ValidationError(fmt::format("config key '{}' has invalid value '{}'", key, text));
  }
  return value;
}

// Little-endian primitive encoding.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { unsigned_le(v, 4); }
  void u64(std::uint64_t v) { unsigned_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

 private:
  void unsigned_le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(unsigned_le(4)); }
  std::uint64_t u64() { return unsigned_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 24)) throw CheckpointError("corrupt checkpoint: string length out of range");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CheckpointError("corrupt checkpoint: unexpected end of file");
    }
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::uint64_t unsigned_le(int n) {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
};

// Builds a zero-initialized parameter skeleton for the stored layout.
ModelParams skeleton(const TrainConfig& config, std::size_t num_tags, std::size_t embedding_dim,
                     const std::optional<TokenVocabulary>& tokens) {
  ModelParams p;
  if (tokens) {
    p.embeddings = Matrix::Zero(static_cast<Eigen::Index>(tokens->size()),
                                static_cast<Eigen::Index>(embedding_dim));
  }
  switch (config.arch) {
    case Architecture::kCrf:
      p.projection = enc::ProjectionParams::Zero(embedding_dim, num_tags);
      break;
    case Architecture::kBiLstmCrf:
      p.bilstm = enc::BiLstmParams::Zero(embedding_dim, config.hidden);
      p.projection = enc::ProjectionParams::Zero(2 * config.hidden, num_tags);
      break;
    case Architecture::kLinear:
      p.fc_head = enc::FcHeadParams::Zero(embedding_dim, config.fc_size, num_tags);
      break;
  }
  if (uses_crf(config.arch)) {
    const auto size = static_cast<Eigen::Index>(num_tags + 2);
    p.transitions = Matrix::Zero(size, size);
  }
  return p;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ValidationError(fmt::format("dropout {} outside [0, 1)", dropout));
  }
  if (hidden < 1 || fc_size < 1 || embedding_dim < 1) {
    throw ValidationError("hidden, fc_size and embedding_dim must be positive");
  }
  if (!(lr_min > 0.0) || !(lr_min <= lr_max)) {
    throw ValidationError(fmt::format("learning rate range [{}, {}] is invalid", lr_min, lr_max));
  }
  if (cycle_length == 1) throw ValidationError("cycle length must be 0 (auto) or at least 2");
  if (!(clip_norm > 0.0)) throw ValidationError("clip norm must be positive");
  if (min_count < 1) throw ValidationError("min_count must be at least 1");
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  return {
      {"arch", std::string(to_string(arch))},
      {"epochs", fmt::format("{}", epochs)},
      {"dropout", fmt::format("{}", dropout)},
      {"hidden", fmt::format("{}", hidden)},
      {"fc_size", fmt::format("{}", fc_size)},
      {"fc_activation", "relu"},
      {"embedding_dim", fmt::format("{}", embedding_dim)},
      {"lr_min", fmt::format("{}", lr_min)},
      {"lr_max", fmt::format("{}", lr_max)},
      {"lr_shape", "triangular"},
      {"cycle_length", fmt::format("{}", cycle_length)},
      {"clip_norm", fmt::format("{}", clip_norm)},
      {"min_count", fmt::format("{}", min_count)},
      {"seed", fmt::format("{}", seed)},
      {"selection_metric", "dev_macro_f1"},
  };
}

TrainConfig TrainConfig::FromKv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  const auto arch_it = kv.find("arch");
  if (arch_it == kv.end()) throw ValidationError("missing config key 'arch'");
  c.arch = parse_architecture(arch_it->second);
  c.epochs = parse_number<int>(kv, "epochs");
  c.dropout = parse_number<double>(kv, "dropout");
  c.hidden = parse_number<std::size_t>(kv, "hidden");
  c.fc_size = parse_number<std::size_t>(kv, "fc_size");
  c.embedding_dim = parse_number<std::size_t>(kv, "embedding_dim");
  c.lr_min = parse_number<double>(kv, "lr_min");
  c.lr_max = parse_number<double>(kv, "lr_max");
  c.cycle_length = parse_number<std::size_t>(kv, "cycle_length");
  c.clip_norm = parse_number<double>(kv, "clip_norm");
  c.min_count = parse_number<std::size_t>(kv, "min_count");
  c.seed = parse_number<std::uint64_t>(kv, "seed");
  c.validate();
  return c;
}

Tagger Checkpoint::tagger() const {
  return Tagger(config, TagVocabulary(types), tokens, embedding_dim, params);
}

Checkpoint Checkpoint::FromTagger(const Tagger& tagger, double best_dev_f1, int best_epoch) {
  Checkpoint c;
  c.config = tagger.config();
  c.types = tagger.tags().types();
  c.tokens = tagger.tokens();
  c.embedding_dim = tagger.embedding_dim();
  c.params = tagger.params();
  c.best_dev_f1 = best_dev_f1;
  c.best_epoch = best_epoch;
  return c;
}

bool Checkpoint::operator==(const Checkpoint& other) const {
  return version == other.version && config == other.config && types == other.types &&
         tokens == other.tokens && embedding_dim == other.embedding_dim &&
         std::bit_cast<std::uint64_t>(best_dev_f1) == std::bit_cast<std::uint64_t>(other.best_dev_f1) &&
         best_epoch == other.best_epoch && bit_equal(params, other.params);
}

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out) {
  Writer w(out);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(checkpoint.version);

  auto meta = checkpoint.config.to_kv();
  std::string types;
  for (const auto& name : checkpoint.types.names()) {
    if (!types.empty()) types += ',';
    types += name;
  }
  meta["entity_types"] = types;
  meta["num_tags"] = fmt::format("{}", 1 + 2 * checkpoint.types.size());
  meta["embedding_source"] = checkpoint.tokens ? "trainable" : "ingested";
  meta["embedding_dim_actual"] = fmt::format("{}", checkpoint.embedding_dim);
  meta["best_epoch"] = fmt::format("{}", checkpoint.best_epoch);
  meta["best_dev_f1"] = fmt::format("{}", checkpoint.best_dev_f1);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [key, value] : meta) {
    w.str(key);
    w.str(value);
  }
  // best_dev_f1 again as raw bits so the round trip is exact.
  w.f64(checkpoint.best_dev_f1);

  const auto& vocab = checkpoint.tokens;
  w.u32(vocab ? static_cast<std::uint32_t>(vocab->tokens().size()) : 0);
  if (vocab) {
    for (const auto& token : vocab->tokens()) w.str(token);
  }

  const auto views = tensors(checkpoint.params);
  w.u32(static_cast<std::uint32_t>(views.size()));
  for (const auto& view : views) {
    w.str(view.name);
    w.u64(static_cast<std::uint64_t>(view.rows));
    w.u64(static_cast<std::uint64_t>(view.cols));
    for (const double x : view.values()) w.f64(x);
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[sizeof(kMagic)];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("corrupt checkpoint: bad magic bytes");
  }
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw CheckpointError(fmt::format("checkpoint format version {} is not supported (expected {})",
                                      c.version, kCheckpointVersion));
  }

  std::map<std::string, std::string> meta;
  const std::uint32_t meta_count = r.u32();
  if (meta_count > 4096) throw CheckpointError("corrupt checkpoint: metadata count out of range");
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = r.str();
    meta[key] = r.str();
  }
  c.best_dev_f1 = r.f64();

  try {
    c.config = TrainConfig::FromKv(meta);
    c.types = EntityTypeSet::FromCsv(meta.at("entity_types"));
    c.embedding_dim = parse_number<std::size_t>(meta, "embedding_dim_actual");
    c.best_epoch = parse_number<int>(meta, "best_epoch");
    const auto stored_tags = parse_number<std::size_t>(meta, "num_tags");
    if (stored_tags != 1 + 2 * c.types.size()) {
      throw ShapeError(fmt::format("checkpoint declares {} tags but {} entity types", stored_tags,
                                   c.types.size()));
    }
  } catch (const std::out_of_range&) {
    throw CheckpointError("corrupt checkpoint: missing metadata");
  } catch (const ValidationError& e) {
    throw CheckpointError(fmt::format("corrupt checkpoint: {}", e.what()));
  }

  const std::uint32_t token_count = r.u32();
  const bool trainable = meta["embedding_source"] == "trainable";
  if (trainable) {
    std::vector<std::string> tokens;
    tokens.reserve(token_count);
    for (std::uint32_t i = 0; i < token_count; ++i) tokens.push_back(r.str());
    c.tokens = TokenVocabulary(tokens);
    if (c.tokens->tokens().size() != tokens.size()) {
      throw CheckpointError("corrupt checkpoint: duplicate vocabulary entries");
    }
  } else if (token_count != 0) {
    throw CheckpointError("corrupt checkpoint: vocabulary stored for ingested embeddings");
  }

  const auto num_tags = 1 + 2 * c.types.size();
  c.params = skeleton(c.config, num_tags, c.embedding_dim, c.tokens);
  auto views = tensors(c.params);
  const std::uint32_t tensor_count = r.u32();
  if (tensor_count != views.size()) {
    throw ShapeError(fmt::format("checkpoint holds {} tensors, architecture {} needs {}",
                                 tensor_count, to_string(c.config.arch), views.size()));
  }
  for (auto& view : views) {
    const std::string name = r.str();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows > kMaxElements || cols > kMaxElements || rows * cols > kMaxElements) {
      throw CheckpointError(fmt::format("corrupt checkpoint: tensor '{}' size out of range", name));
    }
    if (name != view.name) {
      throw CheckpointError(fmt::format("checkpoint tensor '{}' found where '{}' was expected", name,
                                        view.name));
    }
    if (static_cast<Eigen::Index>(rows) != view.rows || static_cast<Eigen::Index>(cols) != view.cols) {
      throw ShapeError(fmt::format("checkpoint tensor '{}' is {}x{}, expected {}x{}", name, rows, cols,
                                   view.rows, view.cols));
    }
    for (double& x : view.values()) x = r.f64();
  }
  if (!r.at_end()) throw CheckpointError("corrupt checkpoint: trailing bytes");
  if (c.params.transitions) {
    crf::TransitionMatrix pinned(*c.params.transitions);
    if (!(pinned.scores() == *c.params.transitions)) {
      throw CheckpointError("corrupt checkpoint: transition boundary cells are not pinned");
    }
  }
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const std::string temp = path + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(fmt::format("cannot write '{}'", temp));
    try {
      write_checkpoint(checkpoint, out);
      out.close();
      if (!out) throw CheckpointError(fmt::format("failed to write '{}'", temp));
    } catch (...) {
      out.close();
      std::filesystem::remove(temp);
      throw;
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp);
    throw CheckpointError(fmt::format("cannot move checkpoint into '{}': {}", path, ec.message()));
  }
}

Checkpoint load_checkpoint(const std::string& path, const TagVocabulary* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path));
  Checkpoint c = read_checkpoint(in);
  if (expected != nullptr) check_compatible(c, *expected);
  return c;
}

void check_compatible(const Checkpoint& checkpoint, const TagVocabulary& tags) {
  const int stored = static_cast<int>(1 + 2 * checkpoint.types.size());
  if (stored != tags.size()) {
    throw ShapeError(fmt::format("checkpoint has {} tags, input vocabulary has {}", stored, tags.size()));
  }
  if (!(checkpoint.types == tags.types())) {
    throw ShapeError("checkpoint entity types differ from the input vocabulary");
  }
}

}  // namespace nertag::train
