#include "etfc/frame_io.hpp"

#include <json.hpp>

#include "etfc/csv.hpp"
#include "etfc/error.hpp"

namespace etfc {

using nlohmann::json;

std::string frame_to_json(const EtfFrame& frame) {
  json j;
  j["dim"] = frame.dim;
  j["num_classes"] = frame.num_classes;
  j["rotation_seed"] = frame.rotation_seed;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(frame.dim) * frame.num_classes);
  for (int r = 0; r < frame.dim; ++r)
    for (int c = 0; c < frame.num_classes; ++c) flat.push_back(frame.columns(r, c));
  j["columns"] = flat;
  return j.dump(2);
}

EtfFrame frame_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("frame json: ") + e.what());
  }
  EtfFrame frame;
  try {
    frame.dim = j.at("dim").get<int>();
    frame.num_classes = j.at("num_classes").get<int>();
    frame.rotation_seed = j.at("rotation_seed").get<std::uint64_t>();
    const auto flat = j.at("columns").get<std::vector<double>>();
    if (frame.dim < 1 || frame.num_classes < 1 ||
        flat.size() != static_cast<std::size_t>(frame.dim) * frame.num_classes) {
      throw IoError("frame json: columns size does not match dim * num_classes");
    }
    frame.columns.resize(frame.dim, frame.num_classes);
    for (int r = 0; r < frame.dim; ++r)
      for (int c = 0; c < frame.num_classes; ++c)
        frame.columns(r, c) = flat[static_cast<std::size_t>(r) * frame.num_classes + c];
  } catch (const json::exception& e) {
    throw IoError(std::string("frame json: ") + e.what());
  }
  return frame;
}

std::string frame_to_csv(const EtfFrame& frame) {
  std::vector<std::string> header{"class", "rotation_seed"};
  for (int r = 0; r < frame.dim; ++r) header.push_back("x" + std::to_string(r));
  csv::Writer w(std::move(header));
  for (int c = 0; c < frame.num_classes; ++c) {
    std::vector<std::string> row{std::to_string(c), std::to_string(frame.rotation_seed)};
    for (int r = 0; r < frame.dim; ++r) row.push_back(csv::format_double(frame.columns(r, c)));
    w.add_row(std::move(row));
  }
  return w.str();
}

EtfFrame frame_from_csv(const std::string& text) {
  const auto table = csv::parse(text);
  if (table.header.size() < 3) throw IoError("frame csv: expected class, rotation_seed and coordinates");
  EtfFrame frame;
  frame.dim = static_cast<int>(table.header.size()) - 2;
  frame.num_classes = static_cast<int>(table.rows.size());
  frame.columns.resize(frame.dim, frame.num_classes);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (std::stoi(row[0]) != static_cast<int>(i)) throw IoError("frame csv: classes out of order");
    frame.rotation_seed = std::stoull(row[1]);
    for (int r = 0; r < frame.dim; ++r)
      frame.columns(r, static_cast<Eigen::Index>(i)) = csv::parse_double(row[static_cast<std::size_t>(r) + 2]);
  }
  return frame;
}

}  // namespace etfc
