#pragma once

#include <string>

#include "taildep/estimator.hpp"
#include "taildep/models.hpp"
#include "taildep/stdf.hpp"

namespace taildep {

// CSV with comma or semicolon delimiters and an optional header row;
// non-numeric cells raise config_error with the line and column position.
DataMatrix read_csv_matrix(const std::string& path);

// Writes a data matrix with header x1,...,xd.
void write_csv_matrix(const std::string& path, const DataMatrix& data);

// Plain-text DAG description: one edge per line, "parent child param_name"
// with 1-based node ids; parameters are ordered by first appearance and
// repeated names share a parameter. '#' starts a comment.
Dag read_dag_file(const std::string& path);

// Explicit evaluation points, one per CSV row with d columns.
PointSet read_point_file(const std::string& path, int d);

}  // namespace taildep
