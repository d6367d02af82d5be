#include "nsdx/errors.hpp"

namespace nsdx {

ParseError::ParseError(std::size_t line, const std::string& what)
    : ValidationFailure("line " + std::to_string(line) + ": " + what), line_(line) {}

DivergenceError::DivergenceError(int epoch, const std::string& what)
    : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

StageError::StageError(std::string stage, const std::string& what)
    : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}

}  // namespace nsdx
