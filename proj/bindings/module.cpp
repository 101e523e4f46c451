#include <pybind11/pybind11.h>
PYBIND11_MODULE(_drex, m) { m.doc() = "placeholder"; }
