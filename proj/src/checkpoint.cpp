#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "cclc/error.hpp"
#include "cclc/trainer.hpp"

namespace cclc {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'L', 'C'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buffer_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) buffer_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buffer_.append(s);
  }
  void raw(const std::string& s) { buffer_.append(s); }

  const std::string& bytes() const { return buffer_; }

 private:
  std::string buffer_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<std::uint8_t>(p[b]);
    return v;
  }
  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<std::uint8_t>(p[b]);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    return std::string(take(n), n);
  }
  std::string raw(std::size_t n) { return std::string(take(n), n); }

  bool exhausted() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw checkpoint_error("truncated checkpoint file");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

void write_tensor(ByteWriter& out, const Tensor& t) {
  out.u8(static_cast<std::uint8_t>(t.rank()));
  for (int d = 0; d < t.rank(); ++d) out.u32(static_cast<std::uint32_t>(t.dim(d)));
  const double* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) out.f64(p[i]);
}

Tensor read_tensor(ByteReader& in) {
  const int rank = in.u8();
  if (rank < 1 || rank > 3) throw checkpoint_error("checkpoint tensor has unsupported rank");
  std::vector<int> shape;
  for (int d = 0; d < rank; ++d) {
    const std::uint32_t extent = in.u32();
    if (extent == 0 || extent > (1u << 30)) {
      throw checkpoint_error("checkpoint tensor has invalid extent");
    }
    shape.push_back(static_cast<int>(extent));
  }
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = in.f64();
  return Tensor(std::move(shape), std::move(values));
}

std::string config_to_text(const ModelConfig& config) {
  std::ostringstream out;
  out << "embed_dim = " << config.embed_dim << '\n';
  out << "proj_dim = " << config.proj_dim << '\n';
  out << "filter_widths =";
  for (int w : config.filter_widths) out << ' ' << w;
  out << '\n';
  out << "filters_per_width = " << config.filters_per_width << '\n';
  out << "lc_enabled = " << (config.lc_enabled ? 1 : 0) << '\n';
  out << "n_clusters = " << config.n_clusters << '\n';
  out << "k_pool = " << config.k_pool << '\n';
  out << "mem_dim = " << config.mem_dim << '\n';
  char dropout[64];
  std::snprintf(dropout, sizeof dropout, "%.17g", config.dropout);
  out << "dropout = " << dropout << '\n';
  return out.str();
}

ModelConfig config_from_text(const std::string& text) {
  ModelConfig config;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw checkpoint_error("malformed config line in checkpoint");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    };
    trim(key);
    trim(value);
    try {
      if (key == "embed_dim") {
        config.embed_dim = std::stoi(value);
      } else if (key == "proj_dim") {
        config.proj_dim = std::stoi(value);
      } else if (key == "filter_widths") {
        config.filter_widths.clear();
        std::istringstream widths(value);
        int w = 0;
        while (widths >> w) config.filter_widths.push_back(w);
      } else if (key == "filters_per_width") {
        config.filters_per_width = std::stoi(value);
      } else if (key == "lc_enabled") {
        config.lc_enabled = std::stoi(value) != 0;
      } else if (key == "n_clusters") {
        config.n_clusters = std::stoi(value);
      } else if (key == "k_pool") {
        config.k_pool = std::stoi(value);
      } else if (key == "mem_dim") {
        config.mem_dim = std::stoi(value);
      } else if (key == "dropout") {
        config.dropout = std::stod(value);
      } else {
        throw checkpoint_error("unknown config key in checkpoint: " + key);
      }
    } catch (const checkpoint_error&) {
      throw;
    } catch (const std::exception&) {
      throw checkpoint_error("malformed config value in checkpoint for key: " + key);
    }
  }
  return config;
}

void expect_shape(const Tensor& t, const std::vector<int>& shape, const std::string& name) {
  if (t.shape() != shape) {
    throw checkpoint_error("checkpoint parameter '" + name + "' has shape " +
                           shape_string(t.shape()) + ", expected " + shape_string(shape));
  }
}

void validate_against_config(const Checkpoint& checkpoint) {
  const ModelConfig& config = checkpoint.config;
  const int comparison = config.comparison_dim();
  const ModelParams& params = checkpoint.params;

  expect_shape(params.w_gate, {config.proj_dim, config.embed_dim}, "w_gate");
  expect_shape(params.w_value, {config.proj_dim, config.embed_dim}, "w_value");
  expect_shape(params.w_att_q, {config.proj_dim, config.proj_dim}, "w_att_q");
  expect_shape(params.w_att_a, {config.proj_dim, config.proj_dim}, "w_att_a");
  if (params.conv_filters.size() != config.filter_widths.size()) {
    throw checkpoint_error("checkpoint filter bank count does not match config");
  }
  for (std::size_t i = 0; i < params.conv_filters.size(); ++i) {
    expect_shape(params.conv_filters[i],
                 {config.filter_widths[i], comparison, config.filters_per_width},
                 "conv_filters_" + std::to_string(i));
  }
  if (config.lc_enabled) {
    expect_shape(params.memory, {config.resolved_mem_dim(), config.n_clusters}, "memory");
    expect_shape(params.w_lc, {config.proj_dim, config.resolved_mem_dim()}, "w_lc");
  }
  expect_shape(params.w_out, {2 * config.aggregate_dim()}, "w_out");
  expect_shape(checkpoint.embedding_table, {checkpoint.vocab.size(), config.embed_dim},
               "embedding");
}

}  // namespace

Checkpoint make_checkpoint(const Model& model, const OptimizerState& optimizer,
                           double best_dev_map, const std::string& rng_state) {
  Checkpoint checkpoint;
  checkpoint.config = model.config;
  checkpoint.params = model.params.clone();
  checkpoint.embedding_table = model.embedding.table.clone();
  checkpoint.embedding_trainable = model.embedding.trainable;
  checkpoint.vocab = model.vocab;
  checkpoint.optimizer = optimizer;
  checkpoint.optimizer.first_moment.clear();
  checkpoint.optimizer.second_moment.clear();
  for (const Tensor& m : optimizer.first_moment) {
    checkpoint.optimizer.first_moment.push_back(m.clone());
  }
  for (const Tensor& v : optimizer.second_moment) {
    checkpoint.optimizer.second_moment.push_back(v.clone());
  }
  checkpoint.best_dev_map = best_dev_map;
  checkpoint.rng_state = rng_state;
  return checkpoint;
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  Model model;
  model.config = checkpoint.config;
  model.config.validate();
  model.vocab = checkpoint.vocab;
  model.embedding.table = checkpoint.embedding_table.clone();
  model.embedding.trainable = checkpoint.embedding_trainable;
  model.params = checkpoint.params.clone();
  return model;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  ByteWriter out;
  out.raw(std::string(kMagic, 4));
  out.u32(checkpoint.version);

  {  // config
    ByteWriter section;
    section.raw(config_to_text(checkpoint.config));
    out.u64(section.bytes().size());
    out.raw(section.bytes());
  }
  {  // vocabulary, index order
    ByteWriter section;
    section.u32(static_cast<std::uint32_t>(checkpoint.vocab.size()));
    for (const std::string& token : checkpoint.vocab.tokens()) section.str(token);
    out.u64(section.bytes().size());
    out.raw(section.bytes());
  }
  {  // parameters plus the embedding table
    ByteWriter section;
    const auto named = checkpoint.params.named();
    section.u32(static_cast<std::uint32_t>(named.size()) + 1);
    for (const auto& [name, tensor] : named) {
      section.str(name);
      write_tensor(section, *tensor);
    }
    section.str("embedding");
    write_tensor(section, checkpoint.embedding_table);
    out.u64(section.bytes().size());
    out.raw(section.bytes());
  }
  {  // optimizer
    ByteWriter section;
    const OptimizerState& opt = checkpoint.optimizer;
    section.f64(opt.learning_rate);
    section.f64(opt.beta1);
    section.f64(opt.beta2);
    section.f64(opt.epsilon);
    section.f64(opt.clip_norm);
    section.i64(opt.step);
    section.u32(static_cast<std::uint32_t>(opt.first_moment.size()));
    for (const Tensor& m : opt.first_moment) write_tensor(section, m);
    for (const Tensor& v : opt.second_moment) write_tensor(section, v);
    out.u64(section.bytes().size());
    out.raw(section.bytes());
  }
  {  // trailer
    ByteWriter section;
    section.f64(checkpoint.best_dev_map);
    section.u8(checkpoint.embedding_trainable ? 1 : 0);
    section.str(checkpoint.rng_state);
    out.u64(section.bytes().size());
    out.raw(section.bytes());
  }

  // stage to a temp file so a failed write never leaves a partial checkpoint
  const std::string temp_path = path + ".tmp";
  {
    std::ofstream file(temp_path, std::ios::binary | std::ios::trunc);
    if (!file) throw checkpoint_error("save_checkpoint: cannot open " + temp_path);
    file.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
    if (!file) throw checkpoint_error("save_checkpoint: write to " + temp_path + " failed");
  }
  if (std::rename(temp_path.c_str(), path.c_str()) != 0) {
    std::remove(temp_path.c_str());
    throw checkpoint_error("save_checkpoint: cannot move checkpoint into " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw checkpoint_error("load_checkpoint: cannot open " + path);
  std::ostringstream content;
  content << file.rdbuf();
  ByteReader in(content.str());

  const std::string magic = in.raw(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw checkpoint_error("load_checkpoint: bad magic bytes, not a checkpoint file");
  }
  Checkpoint checkpoint;
  checkpoint.version = in.u32();
  if (checkpoint.version != Checkpoint::current_version) {
    throw checkpoint_error("load_checkpoint: unsupported version " +
                           std::to_string(checkpoint.version));
  }

  {  // config
    ByteReader section(in.raw(in.u64()));
    checkpoint.config = config_from_text(section.raw(section.remaining()));
  }
  {  // vocabulary
    ByteReader section(in.raw(in.u64()));
    const std::uint32_t count = section.u32();
    std::vector<std::string> tokens;
    tokens.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) tokens.push_back(section.str());
    try {
      checkpoint.vocab = Vocabulary::from_tokens(std::move(tokens));
    } catch (const value_error& e) {
      throw checkpoint_error(std::string("load_checkpoint: bad vocabulary: ") + e.what());
    }
  }
  {  // parameters
    ByteReader section(in.raw(in.u64()));
    const std::uint32_t count = section.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::string name = section.str();
      Tensor tensor = read_tensor(section);
      if (name == "w_gate") {
        checkpoint.params.w_gate = std::move(tensor);
      } else if (name == "w_value") {
        checkpoint.params.w_value = std::move(tensor);
      } else if (name == "w_att_q") {
        checkpoint.params.w_att_q = std::move(tensor);
      } else if (name == "w_att_a") {
        checkpoint.params.w_att_a = std::move(tensor);
      } else if (name.rfind("conv_filters_", 0) == 0) {
        checkpoint.params.conv_filters.push_back(std::move(tensor));
      } else if (name == "memory") {
        checkpoint.params.memory = std::move(tensor);
      } else if (name == "w_lc") {
        checkpoint.params.w_lc = std::move(tensor);
      } else if (name == "w_out") {
        checkpoint.params.w_out = std::move(tensor);
      } else if (name == "embedding") {
        checkpoint.embedding_table = std::move(tensor);
      } else {
        throw checkpoint_error("load_checkpoint: unknown parameter '" + name + "'");
      }
    }
  }
  {  // optimizer
    ByteReader section(in.raw(in.u64()));
    OptimizerState& opt = checkpoint.optimizer;
    opt.learning_rate = section.f64();
    opt.beta1 = section.f64();
    opt.beta2 = section.f64();
    opt.epsilon = section.f64();
    opt.clip_norm = section.f64();
    opt.step = section.i64();
    const std::uint32_t count = section.u32();
    for (std::uint32_t i = 0; i < count; ++i) opt.first_moment.push_back(read_tensor(section));
    for (std::uint32_t i = 0; i < count; ++i) opt.second_moment.push_back(read_tensor(section));
  }
  {  // trailer
    ByteReader section(in.raw(in.u64()));
    checkpoint.best_dev_map = section.f64();
    checkpoint.embedding_trainable = section.u8() != 0;
    checkpoint.rng_state = section.str();
  }
  if (!in.exhausted()) {
    throw checkpoint_error("load_checkpoint: trailing bytes after final section");
  }

  validate_against_config(checkpoint);
  return checkpoint;
}

}  // namespace cclc
