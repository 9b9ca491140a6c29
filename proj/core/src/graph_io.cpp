#include <fstream>
#include <string>

#include "json.hpp"
#include "lesionuq/graph.hpp"
#include "text_format.hpp"

namespace lesionuq {
namespace {

using nlohmann::json;

std::string graph_line(const LesionGraph& g) {
  std::string line;
  line.reserve(64 + g.features.size() * 20 + g.edges.size() * 12);
  line += "{\"scan_id\":";
  line += json(g.scan_id).dump();
  line += ",\"lesion_id\":" + std::to_string(g.lesion_id);
  line += ",\"n_nodes\":" + std::to_string(g.n_nodes());
  line += ",\"size\":" + std::to_string(g.size);
  line += ",\"features\":[";
  for (std::size_t i = 0; i < g.features.size(); ++i) {
    if (i) line += ',';
    detail::append_real(line, g.features[i]);
  }
  line += "],\"edges\":[";
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (i) line += ',';
    line += '[' + std::to_string(g.edges[i].first) + ',' + std::to_string(g.edges[i].second) + ']';
  }
  line += "],\"iou_adj\":";
  detail::append_real(line, g.iou_adj);
  line += ",\"tp\":";
  line += g.tp ? "true" : "false";
  line += '}';
  return line;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw FormatError("graph dataset line " + std::to_string(line_no) + ": " + what);
}

const json& require(const json& obj, const char* key, std::size_t line_no) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(line_no, std::string("missing key \"") + key + "\"");
  return *it;
}

LesionGraph parse_graph(const json& obj, std::size_t width, std::size_t line_no) {
  if (!obj.is_object()) fail(line_no, "expected a JSON object");
  LesionGraph g;
  try {
    g.scan_id = require(obj, "scan_id", line_no).get<std::string>();
    g.lesion_id = require(obj, "lesion_id", line_no).get<std::uint32_t>();
    const auto n_nodes = require(obj, "n_nodes", line_no).get<std::size_t>();
    g.features = require(obj, "features", line_no).get<std::vector<double>>();
    const auto& edges = require(obj, "edges", line_no);
    if (!edges.is_array()) fail(line_no, "\"edges\" is not an array");
    for (const auto& e : edges) {
      if (!e.is_array() || e.size() != 2) fail(line_no, "edge is not a pair");
      g.edges.emplace_back(e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>());
    }
    g.iou_adj = require(obj, "iou_adj", line_no).get<double>();
    g.tp = require(obj, "tp", line_no).get<bool>();
    g.n_features = width;
    if (g.features.size() != n_nodes * width) {
      fail(line_no, "features length does not equal n_nodes x feature width");
    }
    if (n_nodes == 0) fail(line_no, "graph without nodes");
    for (const auto& [a, b] : g.edges) {
      if (a >= n_nodes || b >= n_nodes || a == b) fail(line_no, "edge index out of range");
    }
    if (const auto it = obj.find("size"); it != obj.end()) {
      g.size = it->get<std::size_t>();
    } else {
      // Older files: count lesion-label nodes.
      const std::size_t label_col = width - 4;
      for (std::size_t n = 0; n < n_nodes; ++n) g.size += g.feature(n, label_col) > 0.5;
    }
    if (g.size == 0 || g.size > n_nodes) fail(line_no, "size out of range");
  } catch (const json::exception& e) {
    fail(line_no, e.what());
  }
  return g;
}

}  // namespace

void write_graph_dataset(const GraphDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (!dataset.graphs.empty()) {
    json header;
    header["format_version"] = kGraphFormatVersion;
    header["n_channels"] = dataset.n_channels;
    header["feature_names"] = dataset.feature_names;
    out << header.dump() << '\n';
    const std::size_t width = dataset.feature_names.size();
    for (const auto& g : dataset.graphs) {
      if (g.n_features != width) throw InputError("graph width disagrees with dataset header");
      out << graph_line(g) << '\n';
    }
  }
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

GraphDataset read_graph_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  GraphDataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(line_no, e.what());
    }
    if (!have_header) {
      try {
        if (!obj.is_object()) fail(line_no, "header is not an object");
        const int version = require(obj, "format_version", line_no).get<int>();
        if (version != kGraphFormatVersion) {
          fail(line_no, "unsupported format_version " + std::to_string(version));
        }
        ds.n_channels = require(obj, "n_channels", line_no).get<int>();
        ds.feature_names = require(obj, "feature_names", line_no).get<std::vector<std::string>>();
      } catch (const json::exception& e) {
        fail(line_no, e.what());
      }
      if (ds.n_channels < 0 ||
          ds.feature_names.size() != static_cast<std::size_t>(ds.n_channels) + 4) {
        fail(line_no, "feature_names length must be n_channels + 4");
      }
      have_header = true;
      continue;
    }
    ds.graphs.push_back(parse_graph(obj, ds.feature_names.size(), line_no));
  }
  return ds;
}

}  // namespace lesionuq
