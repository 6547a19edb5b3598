#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shps/types.hpp"

namespace shps {

/// Real-valued arithmetic expression of the point coordinates x, y, z.
/// Grammar: + - * / ^ (right associative), unary minus, parentheses,
/// constants pi and e, and the functions sin cos tan exp log sqrt abs tanh
/// atan (one argument) and atan2 pow min max (two arguments).
class Expression {
 public:
  /// Throws InvalidArgument with the offending column on malformed input.
  static Expression parse(const std::string& text);

  double operator()(const Vec3& x) const;
  const std::string& text() const { return text_; }

  struct Node;  ///< parse tree, defined in the implementation

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace shps
