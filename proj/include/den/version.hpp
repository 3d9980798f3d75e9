#pragma once

namespace den {

constexpr const char* kVersion = "0.1.0";

}  // namespace den
