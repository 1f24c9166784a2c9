#ifndef SPARQ_CONFIG_HPP
#define SPARQ_CONFIG_HPP

#include "sparq/harness.hpp"

#include <string>

namespace sparq {

/// Parses the JSON experiment config. Throws ParseError on malformed input,
/// InputError on invariant violations, IoError if the file cannot be read.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

std::string kernel_spec_json(const KernelSpec& spec);

} // namespace sparq

#endif
