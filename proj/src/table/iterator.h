#pragma once

#include <memory>
#include <string_view>

#include "util/status.h"

namespace alsm {

// Forward iterator over (internal key, value) pairs in internal-key order.
class Iterator {
 public:
  virtual ~Iterator() = default;

  virtual bool Valid() const = 0;
  virtual void SeekToFirst() = 0;
  // Positions at the first entry with key >= target (an encoded internal key).
  virtual void Seek(std::string_view target) = 0;
  virtual void Next() = 0;
  virtual std::string_view key() const = 0;
  virtual std::string_view value() const = 0;
  virtual Status status() const = 0;
};

std::unique_ptr<Iterator> NewEmptyIterator(Status s = Status::OK());

}  // namespace alsm
