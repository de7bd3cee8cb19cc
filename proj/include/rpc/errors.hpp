#pragma once

#include <stdexcept>
#include <string>

namespace rpc {

/// Raised when every candidate in a mixture has zero mass, so no
/// normalised conditional exists.
class NumericUnderflow : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised while reading a data file; the message names row and column.
class IngestError : public std::runtime_error {
public:
  IngestError(const std::string &what, std::size_t row, std::string column)
      : std::runtime_error(what + " (row " + std::to_string(row) +
                           ", column '" + column + "')"),
        row_(row), column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string &column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::string column_;
};

/// The chain produced a non-finite log joint density.
class ChainDiverged : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace rpc
