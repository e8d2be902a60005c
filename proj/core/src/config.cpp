#include "spikegen/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace spikegen {

namespace {

struct Field {
  std::string key;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (is.fail() || !is.eof())
    throw std::invalid_argument("config: bad value '" + v + "' for key '" +
                                key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for key '" +
                              key + "'");
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
#define SG_STR_FIELD(name)                                              \
  Field{#name, [](Config& c, const std::string& v) { c.name = v; },     \
        [](const Config& c) { return c.name; }}
#define SG_NUM_FIELD(name, T)                                             \
  Field{#name,                                                            \
        [](Config& c, const std::string& v) {                             \
          c.name = parse_num<T>(#name, v);                                \
        },                                                                \
        [](const Config& c) {                                             \
          std::ostringstream os;                                          \
          os << c.name;                                                   \
          return os.str();                                                \
        }}
      SG_STR_FIELD(dataset_images),
      SG_STR_FIELD(dataset_labels),
      Field{"dataset_transpose",
            [](Config& c, const std::string& v) {
              c.dataset_transpose = parse_bool("dataset_transpose", v);
            },
            [](const Config& c) {
              return std::string(c.dataset_transpose ? "true" : "false");
            }},
      SG_NUM_FIELD(subset, int),
      SG_NUM_FIELD(t_steps, int),
      SG_NUM_FIELD(t_diffusion, int),
      SG_NUM_FIELD(channels, int),
      SG_NUM_FIELD(codebook_size, int),
      SG_NUM_FIELD(sdid_channels, int),
      SG_NUM_FIELD(tau, float),
      SG_NUM_FIELD(tau_syn, float),
      SG_NUM_FIELD(alpha, float),
      SG_NUM_FIELD(v_th, float),
      SG_NUM_FIELD(v_reset, float),
      SG_NUM_FIELD(beta, float),
      SG_NUM_FIELD(lr, float),
      SG_NUM_FIELD(beta1, float),
      SG_NUM_FIELD(beta2, float),
      SG_NUM_FIELD(weight_decay, float),
      SG_NUM_FIELD(batch_size, int),
      SG_NUM_FIELD(epochs, int),
      SG_NUM_FIELD(seed, uint64_t),
      SG_NUM_FIELD(temperature, float),
      SG_NUM_FIELD(thread_count, int),
      SG_STR_FIELD(vqsvae_ckpt),
      SG_STR_FIELD(sdid_ckpt),
      SG_STR_FIELD(out_dir),
#undef SG_STR_FIELD
#undef SG_NUM_FIELD
  };
  return f;
}

}  // namespace

void Config::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
  };
  require(t_steps >= 1, "t_steps must be >= 1");
  require(t_diffusion >= 1, "t_diffusion must be >= 1");
  require(channels >= 1, "channels must be >= 1");
  require(codebook_size >= 2, "codebook_size must be >= 2");
  require(sdid_channels >= 1, "sdid_channels must be >= 1");
  require(tau >= 1.0f, "tau must be >= 1");
  require(tau_syn > 1.0f, "tau_syn must be > 1");
  require(v_th > v_reset, "v_th must exceed v_reset");
  require(alpha > 0.0f, "alpha must be > 0");
  require(beta >= 0.0f, "beta must be >= 0");
  require(lr > 0.0f, "lr must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 0, "epochs must be >= 0");
  require(subset >= 0, "subset must be >= 0");
  require(temperature > 0.0f, "temperature must be > 0");
  require(thread_count >= 0, "thread_count must be >= 0");
}

Config parse_config_text(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b2 = s.find_first_not_of(" \t");
      const auto e2 = s.find_last_not_of(" \t");
      s = (b2 == std::string::npos) ? "" : s.substr(b2, e2 - b2 + 1);
    };
    trim(key);
    trim(val);
    bool found = false;
    for (const auto& f : fields())
      if (f.key == key) {
        f.set(cfg, val);
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
  }
  return cfg;
}

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const Config& cfg) {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << "=" << f.get(cfg) << "\n";
  return os.str();
}

}  // namespace spikegen
