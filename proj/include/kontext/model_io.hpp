#pragma once

#include <filesystem>
#include <string>

#include "kontext/model.hpp"

namespace kontext {

/// Canonical JSON text of a model. Keys appear in the order
/// observables, outcomes, contexts; each context lists id, observables,
/// distribution, then the optional label and inputs when nonempty.
std::string model_to_json(EmpiricalModel const &model, int indent = -1);

/// Throws ParseError on malformed JSON and InvalidModel on a bad model.
EmpiricalModel model_from_json(std::string const &text);

EmpiricalModel load_model(std::filesystem::path const &path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomically(std::filesystem::path const &path, std::string const &contents);

std::string read_file(std::filesystem::path const &path);

}  // namespace kontext
