#include "sattn/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sattn/errors.hpp"
#include "sattn/rng.hpp"
#include "sattn/spectral.hpp"

namespace sattn {

std::string_view to_string(Architecture a) { return a == Architecture::temporal ? "temporal" : "variate"; }

Architecture parse_architecture(std::string_view name) {
  if (name == "temporal") return Architecture::temporal;
  if (name == "variate") return Architecture::variate;
  throw ConfigError("unknown architecture '" + std::string(name) + "' (expected temporal|variate)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: '" + key + "' expects true|false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("config: duplicate key '" + key + "'");
  }
  return out;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (L < 2) fail("L must be at least 2");
  if (T < 1) fail("T must be positive");
  if (C < 1) fail("C must be positive");
  if (H < 1 || D < 1) fail("H and D must be positive");
  if (D % H != 0) fail("D=" + std::to_string(D) + " is not divisible by H=" + std::to_string(H));
  if (layers < 1) fail("layers must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(lr >= 0.0)) fail("lr must be nonnegative");
  if (batch_size < 1) fail("batch_size must be positive");
  if (train_ratio < 0.0 || val_ratio < 0.0 || train_ratio + val_ratio > 1.0) fail("split ratios must be nonnegative and sum to at most 1");
  if (architecture == Architecture::temporal) {
    if (P < 1 || P > L) fail("patch length P must satisfy 1 <= P <= L");
    if (S < 1 || S > P) fail("stride S must satisfy 1 <= S <= P");
  }
  if (mechanism == Mechanism::fsatten && architecture != Architecture::variate) {
    fail("fsatten requires the variate architecture");
  }
  if (mechanism == Mechanism::soatten && hcc_enabled && kernel_K % 2 == 0) fail("kernel_K must be odd");
  if (mechanism == Mechanism::fsatten && F != 0 && F != spectrum_bins(L)) {
    fail("fsatten uses F = floor(L/2)+1 = " + std::to_string(spectrum_bins(L)) + ", got F=" + std::to_string(F));
  }
}

std::size_t ModelConfig::resolved_F() const {
  if (F != 0) return F;
  switch (mechanism) {
    case Mechanism::fsatten: return spectrum_bins(token_length());
    case Mechanism::soatten: return 32;
    case Mechanism::conventional: return 0;
  }
  return 0;
}

std::size_t ModelConfig::patch_count() const { return (L - P) / S + 2; }

std::size_t ModelConfig::tokens() const { return architecture == Architecture::variate ? C : patch_count(); }

std::size_t ModelConfig::token_length() const { return architecture == Architecture::variate ? L : P; }

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "architecture=" << to_string(architecture) << '\n'
     << "mechanism=" << to_string(mechanism) << '\n'
     << "L=" << L << '\n'
     << "T=" << T << '\n'
     << "C=" << C << '\n'
     << "P=" << P << '\n'
     << "S=" << S << '\n'
     << "H=" << H << '\n'
     << "D=" << D << '\n'
     << "F=" << F << '\n'
     << "kernel_K=" << kernel_K << '\n'
     << "layers=" << layers << '\n'
     << "dropout=" << fmt_double(dropout) << '\n'
     << "mss_enabled=" << (mss_enabled ? "true" : "false") << '\n'
     << "hcc_enabled=" << (hcc_enabled ? "true" : "false") << '\n'
     << "seed=" << seed << '\n'
     << "lr=" << fmt_double(lr) << '\n'
     << "batch_size=" << batch_size << '\n'
     << "epochs=" << epochs << '\n'
     << "train_ratio=" << fmt_double(train_ratio) << '\n'
     << "val_ratio=" << fmt_double(val_ratio) << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig c;
  for (const auto& [key, v] : parse_key_values(text)) {
    if (key == "architecture") c.architecture = parse_architecture(v);
    else if (key == "mechanism") c.mechanism = parse_mechanism(v);
    else if (key == "L") c.L = to_size(key, v);
    else if (key == "T") c.T = to_size(key, v);
    else if (key == "C") c.C = to_size(key, v);
    else if (key == "P") c.P = to_size(key, v);
    else if (key == "S") c.S = to_size(key, v);
    else if (key == "H") c.H = to_size(key, v);
    else if (key == "D") c.D = to_size(key, v);
    else if (key == "F") c.F = to_size(key, v);
    else if (key == "kernel_K") c.kernel_K = to_size(key, v);
    else if (key == "layers") c.layers = to_size(key, v);
    else if (key == "dropout") c.dropout = to_double(key, v);
    else if (key == "mss_enabled") c.mss_enabled = to_bool(key, v);
    else if (key == "hcc_enabled") c.hcc_enabled = to_bool(key, v);
    else if (key == "seed") c.seed = to_size(key, v);
    else if (key == "lr") c.lr = to_double(key, v);
    else if (key == "batch_size") c.batch_size = to_size(key, v);
    else if (key == "epochs") c.epochs = to_size(key, v);
    else if (key == "train_ratio") c.train_ratio = to_double(key, v);
    else if (key == "val_ratio") c.val_ratio = to_double(key, v);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return c;
}

ModelConfig ModelConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void ModelConfig::apply_env_overrides() {
  if (const char* env = std::getenv("SPECTRAL_ATTN_SEED"); env != nullptr && *env != '\0') {
    seed = to_size("SPECTRAL_ATTN_SEED", env);
  }
}

std::string ModelConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_text())));
  return buf;
}

}  // namespace sattn
