#pragma once

#include <cstdio>
#include <string>

namespace panelqboot {

// 17 significant digits: enough for a lossless double -> text -> double
// round trip, so emitted files are bit-stable under reload.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace panelqboot
