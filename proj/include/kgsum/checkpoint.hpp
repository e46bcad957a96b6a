#pragma once

#include <iosfwd>
#include <string>

#include "kgsum/nn/optim.hpp"
#include "kgsum/nn/tape.hpp"

namespace kgsum {

// Versioned named-parameter container: magic line, count, then per
// parameter name, shape, and raw little-endian doubles.
void save_parameters(const nn::ParameterSet& params, const std::string& path);
// Shapes and names must match the registered set exactly.
void load_parameters(nn::ParameterSet& params, const std::string& path);

// Adam moments and step count, for exact training resumption.
void save_optimizer(const nn::ParameterSet& params, const nn::Adam& opt, const std::string& path);
void load_optimizer(nn::ParameterSet& params, nn::Adam& opt, const std::string& path);

// Raw block forms used inside composite files.
void write_parameter_block(std::ostream& out, const nn::ParameterSet& params);
void read_parameter_block(std::istream& in, nn::ParameterSet& params);

}  // namespace kgsum
