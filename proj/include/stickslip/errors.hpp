#pragma once

#include <stdexcept>
#include <string>

namespace stickslip {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A PID/friction constant breaks k_i > 0, k_p > 0, k_v k_p > k_i or f_c > 0.
class AssumptionViolated : public Error {
public:
    using Error::Error;
};

/// The closed-loop cubic has a root with nonnegative real part even though
/// the inequality test passed. Indicates a numerics bug.
class NonHurwitz : public Error {
public:
    using Error::Error;
};

class ZeroWidth : public Error {
public:
    using Error::Error;
};

class SingularA : public Error {
public:
    using Error::Error;
};

class NotInStick : public Error {
public:
    using Error::Error;
};

class BracketFailure : public Error {
public:
    using Error::Error;
};

class EventOverflow : public Error {
public:
    using Error::Error;
};

class SelectionOutOfGraph : public Error {
public:
    using Error::Error;
};

class DomainMismatch : public Error {
public:
    using Error::Error;
};

class GainSynthesisFailed : public Error {
public:
    using Error::Error;
};

/// Raised by enforce() on a failed certificate report. Carries the first
/// violating time pair.
class AuditFailed : public Error {
public:
    AuditFailed(const std::string& what, double t1, double t2)
        : Error(what), t1_(t1), t2_(t2) {}

    double t1() const noexcept { return t1_; }
    double t2() const noexcept { return t2_; }

private:
    double t1_;
    double t2_;
};

/// Malformed experiment configuration (bad JSON, missing fields).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace stickslip
