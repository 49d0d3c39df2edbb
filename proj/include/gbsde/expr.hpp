#pragma once

#include "gbsde/types.hpp"

#include <memory>
#include <string>

namespace gbsde {

/// Arithmetic expressions over the variables t, x1..xN, y, z with the
/// operators + - * / and the functions exp, log, abs, min, max, pow.
/// Parse errors throw ConfigError naming the offending position.
class Expression {
  public:
    static Expression parse(const std::string& text, int num_increments);

    double eval(double t, Eigen::Ref<const Vector> x, double y, double z) const;

    bool uses_t() const { return uses_t_; }
    bool uses_x() const { return uses_x_; }
    bool uses_y() const { return uses_y_; }
    bool uses_z() const { return uses_z_; }
    const std::string& text() const { return text_; }

    struct Node;

  private:
    std::shared_ptr<const Node> root_;
    std::string text_;
    int num_increments_ = 0;
    bool uses_t_ = false, uses_x_ = false, uses_y_ = false, uses_z_ = false;
};

}  // namespace gbsde
