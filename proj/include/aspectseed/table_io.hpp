#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aspectseed/pseudo_label.hpp"

namespace aspectseed {

// Header "id<TAB>label<TAB>p_<class>..." then one row per segment.
void write_predictions(const std::filesystem::path& path, std::span<const Distribution> predictions,
                       std::span<const std::string> class_names, std::span<const std::size_t> ids = {});

struct PredictionTable {
  std::vector<std::string> class_names;
  std::vector<std::size_t> ids;
  std::vector<std::string> labels;
  std::vector<Distribution> probs;
};

PredictionTable read_predictions(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace aspectseed
