// Copyright 2026 The MSF-CNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "msf/errors.hpp"
#include "msf/graph.hpp"
#include "msf/text.hpp"

namespace msf {

Graph read_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::optional<std::size_t> declared;
  std::size_t max_index = 0;
  bool any = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      std::istringstream comment(line.substr(hash + 1));
      std::string word;
      std::size_t count = 0;
      if (comment >> word && word == "nodes" && comment >> count) declared = count;
      line.resize(hash);
    }
    std::istringstream fields(line);
    std::size_t u = 0;
    std::size_t v = 0;
    if (!(fields >> u)) continue;  // blank line
    std::string extra;
    if (!(fields >> v) || (fields >> extra)) {
      throw LoadError("edge list line " + std::to_string(line_no) + ": expected \"u v\"");
    }
    edges.emplace_back(u, v);
    max_index = std::max({max_index, u, v});
    any = true;
  }
  const std::size_t n = declared ? *declared : (any ? max_index + 1 : 0);
  return Graph(n, std::move(edges));
}

Graph read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open edge list " + path.string());
  return read_edge_list(in);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# nodes " << g.node_count() << '\n';
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open CSV " + path.string());
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (rows == 0) cols = cells.size();
    if (cells.size() != cols) {
      throw LoadError(path.string() + ": row " + std::to_string(rows) + " has " +
                      std::to_string(cells.size()) + " columns, expected " + std::to_string(cols));
    }
    for (const auto& cell : cells) {
      const auto v = parse_double(trim(cell));
      if (!v) throw LoadError(path.string() + ": bad number \"" + cell + "\"");
      values.push_back(*v);
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

void write_csv_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace msf
