#include "sattn/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sattn/errors.hpp"

namespace sattn {

namespace {

constexpr const char* kMagic = "sattn-checkpoint v1";
constexpr const char* kConfigEnd = "[end-config]";

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model) {
  out << kMagic << '\n' << "[config]\n" << model.config().to_text() << kConfigEnd << '\n';
  const auto params = model.parameters().all();
  out << "parameters " << params.size() << '\n';
  char buf[40];
  for (const Parameter* p : params) {
    out << "param " << p->name << ' ' << p->value.rank();
    for (std::size_t d : p->value.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p->value[i]);
      out << buf << ((i + 1) % 8 == 0 || i + 1 == p->value.size() ? '\n' : ' ');
    }
  }
}

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  write_checkpoint(out, model);
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Model read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw FormatError("checkpoint: missing header line");
  if (!std::getline(in, line) || line != "[config]") throw FormatError("checkpoint: missing [config] block");
  std::string config_text;
  bool closed = false;
  while (std::getline(in, line)) {
    if (line == kConfigEnd) {
      closed = true;
      break;
    }
    config_text += line + '\n';
  }
  if (!closed) throw FormatError("checkpoint: unterminated config block");
  Model model(ModelConfig::from_text(config_text));

  std::string word;
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "parameters") throw FormatError("checkpoint: missing parameter count");
  auto params = model.parameters().all();
  if (count != params.size()) {
    throw FormatError("checkpoint: stores " + std::to_string(count) + " parameters, config builds " +
                      std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> word >> name >> rank) || word != "param") throw FormatError("checkpoint: malformed parameter record");
    if (name != p->name) throw FormatError("checkpoint: expected parameter " + p->name + ", found " + name);
    Shape shape(rank);
    for (auto& d : shape) {
      if (!(in >> d)) throw FormatError("checkpoint: truncated shape of " + name);
    }
    if (shape != p->value.shape()) {
      throw FormatError("checkpoint: " + name + " has shape " + shape_to_string(shape) + ", expected " +
                        shape_to_string(p->value.shape()));
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      std::string token;
      if (!(in >> token)) throw FormatError("checkpoint: truncated values of " + name);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw FormatError("checkpoint: bad value '" + token + "' in " + name);
      }
      p->value[i] = v;
    }
  }
  return model;
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace sattn
