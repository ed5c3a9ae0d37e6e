#pragma once

#include "smart/core_types.hpp"

#include <filesystem>
#include <vector>

namespace smart {

/// Loads a directory of PNG frames.
///
/// With a `frames.csv` (header `frame_id,file[,ground_truth]`) the listed files
/// are used; an empty ground_truth field means none. Without it every `*.png`
/// is loaded in filename order and numbered from 0.
std::vector<SourceFrame> load_corpus(const std::filesystem::path& dir);

/// Writes frames as `<frame_id>.png` plus a `frames.csv`.
void save_corpus(const std::filesystem::path& dir, const std::vector<SourceFrame>& corpus);

}  // namespace smart
