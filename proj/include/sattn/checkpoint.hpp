#pragma once

#include <iosfwd>
#include <string>

#include "sattn/model.hpp"

namespace sattn {

/// Text container: a magic line, the config as key=value lines, then every
/// parameter as `param <name> <rank> <dims...>` followed by its values in
/// row-major order with 17 significant digits. Loading is lossless.
void write_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::string& path, const Model& model);

/// Rebuilds the model from the stored config and overwrites every parameter.
/// Throws FormatError if the container is malformed or the parameter set
/// differs from what the config produces.
Model read_checkpoint(std::istream& in);
Model load_checkpoint(const std::string& path);

}  // namespace sattn
