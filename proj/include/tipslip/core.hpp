#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tipslip
{

/// Base error for everything thrown by the library. `code` is a short
/// machine-readable tag used by the CLI when it reports failures as JSON.
class Error : public std::runtime_error
{
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code))
    {
    }

    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class InvalidArgument : public Error
{
public:
    explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

/// Equilibrium solve hit its iteration cap. Carries the last max position update.
class ConvergenceError : public Error
{
public:
    ConvergenceError(double residual, int iterations)
        : Error("no_convergence",
                "equilibrium solve did not converge after " + std::to_string(iterations)
                    + " iterations (residual " + std::to_string(residual) + " mm)"),
          residual_(residual)
    {
    }

    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class TimeoutError : public Error
{
public:
    explicit TimeoutError(const std::string& message) : Error("timeout", message) {}
};

class TrackingLoss : public Error
{
public:
    explicit TrackingLoss(std::size_t identity)
        : Error("tracking_loss",
                "no candidate within threshold for identity " + std::to_string(identity)),
          identity_(identity)
    {
    }

    [[nodiscard]] std::size_t identity() const noexcept { return identity_; }

private:
    std::size_t identity_;
};

class FormatError : public Error
{
public:
    explicit FormatError(const std::string& message) : Error("format", message) {}
};

inline constexpr double kGravity = 9.81;  // m/s^2

/// Planar vector in the contact plane, millimetres unless stated otherwise.
struct Vec2
{
    double x{0.0};
    double y{0.0};

    constexpr Vec2& operator+=(Vec2 o) noexcept
    {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr Vec2& operator-=(Vec2 o) noexcept
    {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    constexpr Vec2& operator*=(double s) noexcept
    {
        x *= s;
        y *= s;
        return *this;
    }

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator-(Vec2 a) noexcept { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2 a, Vec2 b) noexcept = default;

    [[nodiscard]] double norm() const noexcept { return std::hypot(x, y); }
    [[nodiscard]] constexpr double squared_norm() const noexcept { return x * x + y * y; }
};

}  // namespace tipslip
