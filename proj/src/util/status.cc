#include "util/status.h"

namespace alsm {

std::string Status::ToString() const {
  std::string_view name;
  switch (code_) {
    case Code::kOk: return "OK";
    case Code::kNotFound: name = "NotFound"; break;
    case Code::kCorruption: name = "Corruption"; break;
    case Code::kIOError: name = "IO error"; break;
    case Code::kInvalidArgument: name = "Invalid argument"; break;
    case Code::kBusy: name = "Busy"; break;
    case Code::kClosed: name = "Closed"; break;
    case Code::kTimedOut: name = "Timed out"; break;
    case Code::kAborted: name = "Aborted"; break;
  }
  std::string out(name);
  if (!msg_.empty()) {
    out += ": ";
    out += msg_;
  }
  return out;
}

}  // namespace alsm
