#pragma once

#include <stdexcept>
#include <string>

namespace selfseg {

// Root of every error the library throws. The kind() tag lets the CLI map
// failures to exit codes without a cascade of catch clauses.
class Error : public std::runtime_error {
 public:
  enum class Kind { Format, Dimension, Io, Manifest, Config, DegenerateInput, Shape, TrainingSet, Divergence, Invalid };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline Error format_error(const std::string& m) { return {Error::Kind::Format, m}; }
inline Error dimension_error(const std::string& m) { return {Error::Kind::Dimension, m}; }
inline Error io_error(const std::string& m) { return {Error::Kind::Io, m}; }
inline Error manifest_error(const std::string& m) { return {Error::Kind::Manifest, m}; }
inline Error config_error(const std::string& m) { return {Error::Kind::Config, m}; }
inline Error degenerate_error(const std::string& m) { return {Error::Kind::DegenerateInput, m}; }
inline Error shape_error(const std::string& m) { return {Error::Kind::Shape, m}; }
inline Error training_set_error(const std::string& m) { return {Error::Kind::TrainingSet, m}; }
inline Error divergence_error(const std::string& m) { return {Error::Kind::Divergence, m}; }
inline Error invalid_error(const std::string& m) { return {Error::Kind::Invalid, m}; }

}  // namespace selfseg
