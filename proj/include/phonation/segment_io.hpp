#pragma once

#include <string>
#include <vector>

#include "phonation/dataset.hpp"
#include "phonation/training.hpp"

namespace phonation {

// On-disk segment container: header (shape, count), packed little-endian
// float64 values, one label byte per segment, then per-segment clip index,
// frame offset, and the clip id table. Seekable by construction since every
// record has a fixed size.
void save_segments(const std::string& path, const std::vector<Segment>& segments);
std::vector<Segment> load_segments(const std::string& path);

// Convenience for the training pipeline: groups loaded training segments by
// originating clip (label taken from the segments).
std::vector<TrainingClip> group_by_clip(const std::vector<Segment>& segments);

}  // namespace phonation
