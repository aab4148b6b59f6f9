#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

namespace msinr {

// One image as a regression problem: coordinates in [0,1]^k paired with
// target values in [0,1]^m. Column p of both matrices is pixel p in row-major
// order.
struct Signal {
  std::string id;
  std::size_t height = 0;
  std::size_t width = 0;
  Eigen::MatrixXd coords;   // k x points
  Eigen::MatrixXd targets;  // m x points

  std::size_t points() const { return static_cast<std::size_t>(coords.cols()); }
  std::size_t channels() const { return static_cast<std::size_t>(targets.rows()); }
};

struct SignalSet {
  std::vector<Signal> train;
  std::vector<Signal> val;
  std::string source;
};

}  // namespace msinr
