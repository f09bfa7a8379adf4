#pragma once

namespace proper::detail {

extern const char* const kElicitL1;
extern const char* const kElicitL2;
extern const char* const kElicitL3;
extern const char* const kAnnotateCode;
extern const char* const kAnnotateMD;
extern const char* const kAnnotatePWAB;
extern const char* const kDgaCode;
extern const char* const kDgaPWAB;
extern const char* const kDgaMD;
extern const char* const kRgaCode;
extern const char* const kRgaMD;
extern const char* const kRgaPWAB;
extern const char* const kJudge;
extern const char* const kCotExtract;
extern const char* const kCotRefine;

}  // namespace proper::detail
