/** Dense helpers for the linear pieces of the unrolled iteration. */

/** y = M x for row-major (rows x cols) M. */
export function matVec(
  m: Float64Array,
  rows: number,
  cols: number,
  x: Float64Array,
  out?: Float64Array,
): Float64Array {
  const y = out ?? new Float64Array(rows);
  for (let r = 0; r < rows; r++) {
    let acc = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) acc += m[base + c] * x[c];
    y[r] = acc;
  }
  return y;
}

/** y = M^T x for row-major (rows x cols) M. */
export function matTVec(
  m: Float64Array,
  rows: number,
  cols: number,
  x: Float64Array,
  out?: Float64Array,
): Float64Array {
  const y = out ?? new Float64Array(cols);
  y.fill(0);
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    const xr = x[r];
    for (let c = 0; c < cols; c++) y[c] += m[base + c] * xr;
  }
  return y;
}

/** Gram-plus-ridge inverse: (A^T A + sigma I)^{-1} for A (rows x cols). */
export function resolventMatrix(a: Float64Array, rows: number, cols: number, sigma: number): Float64Array {
  const g = new Float64Array(cols * cols);
  for (let r = 0; r < rows; r++) {
    const base = r * cols;
    for (let i = 0; i < cols; i++) {
      const v = a[base + i];
      if (v === 0) continue;
      for (let j = 0; j < cols; j++) g[i * cols + j] += v * a[base + j];
    }
  }
  for (let i = 0; i < cols; i++) g[i * cols + i] += sigma;
  return invertSpd(g, cols);
}

/** Gauss-Jordan inverse with partial pivoting (n x n row-major). */
export function invertSpd(m: Float64Array, n: number): Float64Array {
  const a = Float64Array.from(m);
  const inv = new Float64Array(n * n);
  for (let i = 0; i < n; i++) inv[i * n + i] = 1;
  for (let col = 0; col < n; col++) {
    let pivot = col;
    let best = Math.abs(a[col * n + col]);
    for (let r = col + 1; r < n; r++) {
      const v = Math.abs(a[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best === 0) throw new Error("singular matrix in resolvent inverse");
    if (pivot !== col) {
      for (let c = 0; c < n; c++) {
        let t = a[col * n + c];
        a[col * n + c] = a[pivot * n + c];
        a[pivot * n + c] = t;
        t = inv[col * n + c];
        inv[col * n + c] = inv[pivot * n + c];
        inv[pivot * n + c] = t;
      }
    }
    const d = a[col * n + col];
    for (let c = 0; c < n; c++) {
      a[col * n + c] /= d;
      inv[col * n + c] /= d;
    }
    for (let r = 0; r < n; r++) {
      if (r === col) continue;
      const f = a[r * n + col];
      if (f === 0) continue;
      for (let c = 0; c < n; c++) {
        a[r * n + c] -= f * a[col * n + c];
        inv[r * n + c] -= f * inv[col * n + c];
      }
    }
  }
  return inv;
}

export function norm2(x: Float64Array): number {
  let acc = 0;
  for (let i = 0; i < x.length; i++) acc += x[i] * x[i];
  return Math.sqrt(acc);
}

export function nmseDb(hTrue: Float64Array, hEst: Float64Array): number {
  let err = 0;
  let ref = 0;
  for (let i = 0; i < hTrue.length; i++) {
    const d = hTrue[i] - hEst[i];
    err += d * d;
    ref += hTrue[i] * hTrue[i];
  }
  if (ref === 0) throw new Error("NMSE undefined for zero reference");
  if (err === 0) return -Infinity;
  return 10 * Math.log10(err / ref);
}
