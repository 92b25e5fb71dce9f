// forwards the conventional include path to the vendored single header
#pragma once
#include "../json.hpp"
