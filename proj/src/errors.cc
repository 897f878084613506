#include "akhcfs/errors.h"

namespace akhcfs {

void throw_non_finite(const char* what) {
  throw NumericError(std::string("non-finite value for ") + what);
}

}  // namespace akhcfs
