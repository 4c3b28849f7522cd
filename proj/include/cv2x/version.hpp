#pragma once

namespace cv2x {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cv2x
