#pragma once

#include <string>

#include "etfc/etf.hpp"

namespace etfc {

/// {"dim", "num_classes", "rotation_seed", "columns"} with columns as a flat
/// row-major d*K array. Values round-trip exactly.
std::string frame_to_json(const EtfFrame& frame);
EtfFrame frame_from_json(const std::string& text);

/// One frame column per line: "class,rotation_seed,x0,...,x{d-1}".
std::string frame_to_csv(const EtfFrame& frame);
EtfFrame frame_from_csv(const std::string& text);

}  // namespace etfc
