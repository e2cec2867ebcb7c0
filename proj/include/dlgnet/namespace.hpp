#pragma once

// Single and double precision builds live in separate inline namespaces, so
// both libraries can be linked into one program.
#ifdef DLGNET_DOUBLE
#define DLGNET_NAMESPACE_BEGIN \
  namespace dlg {              \
  inline namespace f64 {
#else
#define DLGNET_NAMESPACE_BEGIN \
  namespace dlg {              \
  inline namespace f32 {
#endif
#define DLGNET_NAMESPACE_END \
  }                          \
  }
