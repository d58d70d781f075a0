#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shapead {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeshError : public Error {
 public:
  using Error::Error;
};

class ParseError : public MeshError {
 public:
  using MeshError::MeshError;
};

/// Raised when a mesh move produces a cell with (numerically) non-positive area.
class DegenerateCellError : public MeshError {
 public:
  DegenerateCellError(int cell, double area);
  int cell() const { return cell_; }
  double area() const { return area_; }

 private:
  int cell_;
  double area_;
};

class FormError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public SolverError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : SolverError(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

class TapeError : public Error {
 public:
  using Error::Error;
};

// Warnings go to stderr unless a handler is installed (tests capture them).
using WarningHandler = std::function<void(std::string_view)>;
void warn(std::string_view message);
WarningHandler set_warning_handler(WarningHandler handler);

}  // namespace shapead
