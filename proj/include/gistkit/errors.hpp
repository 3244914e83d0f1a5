#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gistkit {

/// Stable error categories. The C API maps these one-to-one onto gk_status.
enum class ErrorCode {
  kContractViolation = 1,
  kEmptyHistory,
  kGateway,
  kProtocol,
  kJudgeParse,
  kLoad,
  kIntegrity,
  kEmptyCorpus,
  kIo,
  kNotImplemented,
  kRunFailed,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& message)
      : Error(ErrorCode::kContractViolation, message) {}
};

class EmptyHistory : public Error {
 public:
  explicit EmptyHistory(const std::string& user_id)
      : Error(ErrorCode::kEmptyHistory, "empty history for user " + user_id) {}
};

/// Provider call failed after retries (or with a non-retryable status).
class GatewayError : public Error {
 public:
  GatewayError(int last_status, const std::string& message)
      : Error(ErrorCode::kGateway, message), last_status_(last_status) {}

  int last_status() const noexcept { return last_status_; }

 private:
  int last_status_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error(ErrorCode::kProtocol, message) {}
};

class JudgeParseError : public Error {
 public:
  JudgeParseError(const std::string& message, std::string raw_text)
      : Error(ErrorCode::kJudgeParse, message), raw_text_(std::move(raw_text)) {}

  const std::string& raw_text() const noexcept { return raw_text_; }

 private:
  std::string raw_text_;
};

/// Corpus schema problem; carries the offending instance index and field path.
class LoadError : public Error {
 public:
  LoadError(long instance_index, std::string field_path, const std::string& message)
      : Error(ErrorCode::kLoad, format(instance_index, field_path, message)),
        instance_index_(instance_index),
        field_path_(std::move(field_path)) {}

  long instance_index() const noexcept { return instance_index_; }
  const std::string& field_path() const noexcept { return field_path_; }

 private:
  static std::string format(long index, const std::string& path, const std::string& message) {
    std::string out = "load error";
    if (index >= 0) out += " at instance " + std::to_string(index);
    if (!path.empty()) out += " (" + path + ")";
    return out + ": " + message;
  }

  long instance_index_;
  std::string field_path_;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& message)
      : Error(ErrorCode::kIntegrity, message) {}
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error(ErrorCode::kEmptyCorpus, "corpus has no instances") {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorCode::kIo, message) {}
};

class NotImplemented : public Error {
 public:
  explicit NotImplemented(const std::string& what)
      : Error(ErrorCode::kNotImplemented, what + " is not implemented") {}
};

}  // namespace gistkit
