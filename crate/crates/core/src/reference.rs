//! Published reference values for the reproduced tables.

/// `n, k1, EMSE(k1), UB(k1), k2, EMSE(k2), UB(k2)` with `k1 = n^(1/5)`, `k2 = n^(1/6)`.
pub const TABLE1: [[f64; 7]; 20] = [
    [15000.0, 6.0, 3.74e-4, 2.87e-2, 4.0, 2.45e-4, 2.25e-2],
    [35000.0, 8.0, 2.15e-4, 2.21e-2, 5.0, 1.35e-4, 1.71e-2],
    [55000.0, 8.0, 1.34e-4, 1.75e-2, 6.0, 1.03e-4, 1.51e-2],
    [75000.0, 9.0, 1.09e-4, 1.57e-2, 6.0, 7.55e-5, 1.29e-2],
    [95000.0, 9.0, 9.48e-5, 1.47e-2, 6.0, 5.86e-5, 1.14e-2],
    [115000.0, 10.0, 8.31e-5, 1.39e-2, 6.0, 5.16e-5, 1.07e-2],
    [135000.0, 10.0, 6.81e-5, 1.25e-2, 7.0, 4.86e-5, 1.04e-2],
    [155000.0, 10.0, 6.37e-5, 1.21e-2, 7.0, 3.88e-5, 9.66e-3],
    [175000.0, 11.0, 6.14e-5, 1.19e-2, 7.0, 3.87e-5, 9.65e-3],
    [195000.0, 11.0, 5.34e-5, 1.11e-2, 7.0, 3.42e-5, 8.79e-3],
    [215000.0, 11.0, 4.67e-5, 1.03e-2, 7.0, 3.40e-5, 8.74e-3],
    [235000.0, 11.0, 4.66e-5, 1.03e-2, 7.0, 2.92e-5, 8.12e-3],
    [255000.0, 12.0, 4.53e-5, 1.02e-2, 7.0, 2.77e-5, 7.95e-3],
    [275000.0, 12.0, 4.24e-5, 9.95e-3, 8.0, 2.77e-5, 7.94e-3],
    [295000.0, 12.0, 3.72e-5, 9.32e-3, 8.0, 2.67e-5, 7.76e-3],
    [315000.0, 12.0, 3.62e-5, 9.21e-3, 8.0, 2.55e-5, 7.64e-3],
    [335000.0, 12.0, 3.39e-5, 8.91e-3, 8.0, 2.28e-5, 7.04e-3],
    [355000.0, 12.0, 3.34e-5, 8.86e-3, 8.0, 2.20e-5, 7.04e-3],
    [375000.0, 13.0, 3.34e-5, 8.86e-3, 8.0, 2.04e-5, 6.84e-3],
    [395000.0, 13.0, 3.12e-5, 8.56e-3, 8.0, 1.92e-5, 6.65e-3],
];

/// `n, k_n, componentwise, Bosq, Guillas` prediction errors, diagonal model.
pub const TABLE2: [[f64; 5]; 20] = [
    [15000.0, 4.0, 2.25e-2, 2.57e-2, 2.36e-2],
    [35000.0, 5.0, 1.71e-2, 1.72e-2, 1.84e-2],
    [55000.0, 6.0, 1.51e-2, 1.65e-2, 1.53e-2],
    [75000.0, 6.0, 1.29e-2, 1.46e-2, 1.37e-2],
    [95000.0, 6.0, 1.14e-2, 1.20e-2, 1.16e-2],
    [115000.0, 6.0, 1.07e-2, 1.10e-2, 1.11e-2],
    [135000.0, 7.0, 1.04e-2, 1.06e-2, 1.07e-2],
    [155000.0, 7.0, 9.66e-3, 9.91e-3, 1.01e-2],
    [175000.0, 7.0, 9.65e-3, 9.79e-3, 9.68e-3],
    [195000.0, 7.0, 8.79e-3, 9.12e-3, 8.93e-3],
    [215000.0, 7.0, 8.74e-3, 8.79e-3, 8.83e-3],
    [235000.0, 7.0, 8.12e-3, 8.69e-3, 8.75e-3],
    [255000.0, 7.0, 7.95e-3, 8.53e-3, 8.73e-3],
    [275000.0, 8.0, 7.94e-3, 8.52e-3, 8.58e-3],
    [295000.0, 8.0, 7.76e-3, 8.49e-3, 8.36e-3],
    [315000.0, 8.0, 7.64e-3, 7.88e-3, 8.13e-3],
    [335000.0, 8.0, 7.04e-3, 7.24e-3, 7.59e-3],
    [355000.0, 8.0, 7.04e-3, 7.23e-3, 6.92e-3],
    [375000.0, 8.0, 6.84e-3, 6.89e-3, 6.90e-3],
    [395000.0, 8.0, 6.65e-3, 6.67e-3, 6.85e-3],
];

/// As [`TABLE2`] with `delta1 = 61/60` and the Guillas example-2 truncation.
pub const TABLE3: [[f64; 5]; 20] = [
    [15000.0, 2.0, 9.91e-3, 1.39e-2, 1.26e-2],
    [35000.0, 3.0, 8.78e-3, 1.34e-2, 1.24e-2],
    [55000.0, 3.0, 7.89e-3, 1.15e-2, 1.14e-2],
    [75000.0, 3.0, 6.49e-3, 1.01e-2, 8.58e-3],
    [95000.0, 3.0, 6.36e-3, 9.09e-3, 8.29e-3],
    [115000.0, 3.0, 6.14e-3, 7.65e-3, 7.26e-3],
    [135000.0, 3.0, 5.91e-3, 7.03e-3, 6.69e-3],
    [155000.0, 3.0, 5.73e-3, 6.77e-3, 6.54e-3],
    [175000.0, 3.0, 5.44e-3, 6.74e-3, 6.16e-3],
    [195000.0, 3.0, 5.10e-3, 6.69e-3, 5.97e-3],
    [215000.0, 4.0, 5.01e-3, 6.48e-3, 5.94e-3],
    [235000.0, 4.0, 4.85e-3, 6.45e-3, 5.83e-3],
    [255000.0, 4.0, 4.17e-3, 6.17e-3, 5.68e-3],
    [275000.0, 4.0, 4.64e-3, 5.99e-3, 5.60e-3],
    [295000.0, 4.0, 4.55e-3, 5.94e-3, 5.58e-3],
    [315000.0, 4.0, 4.48e-3, 5.69e-3, 5.50e-3],
    [335000.0, 4.0, 4.38e-3, 5.58e-3, 5.44e-3],
    [355000.0, 4.0, 4.16e-3, 5.45e-3, 5.42e-3],
    [375000.0, 4.0, 3.91e-3, 5.34e-3, 5.32e-3],
    [395000.0, 4.0, 3.86e-3, 5.29e-3, 5.26e-3],
];

/// `n, k_n = ln n, componentwise, Bosq, Guillas` with empirical eigenvectors.
pub const TABLE4: [[f64; 5]; 20] = [
    [15000.0, 9.0, 8.42e-2, 1.0614, 1.0353],
    [35000.0, 10.0, 5.51e-2, 1.0186, 1.0052],
    [55000.0, 10.0, 4.75e-2, 1.0174, 0.9986],
    [75000.0, 11.0, 4.43e-2, 1.0153, 0.9951],
    [95000.0, 11.0, 3.68e-2, 1.0127, 0.9883],
    [115000.0, 11.0, 3.51e-2, 1.0113, 0.9627],
    [135000.0, 11.0, 3.23e-2, 1.0081, 0.9247],
    [155000.0, 11.0, 2.95e-2, 1.0066, 0.9119],
    [175000.0, 12.0, 2.94e-2, 1.0057, 0.9113],
    [195000.0, 12.0, 2.80e-2, 0.9948, 0.8912],
    [215000.0, 12.0, 2.71e-2, 0.9017, 0.8615],
    [235000.0, 12.0, 2.59e-2, 0.8896, 0.8201],
    [255000.0, 12.0, 2.58e-2, 0.8783, 0.8004],
    [275000.0, 12.0, 2.35e-2, 0.8719, 0.7832],
    [295000.0, 12.0, 2.28e-2, 0.8602, 0.7780],
    [315000.0, 12.0, 2.27e-2, 0.8424, 0.7469],
    [335000.0, 12.0, 2.16e-2, 0.8217, 0.7140],
    [355000.0, 12.0, 2.14e-2, 0.8001, 0.7066],
    [375000.0, 12.0, 2.09e-2, 0.7778, 0.6872],
    [395000.0, 12.0, 2.06e-2, 0.7693, 0.6621],
];

/// As [`TABLE4`] with `k_n = n^(1/6)` on the fine grid.
pub const TABLE5: [[f64; 5]; 20] = [
    [15000.0, 4.0, 9.88e-2, 9.25e-2, 0.1059],
    [35000.0, 5.0, 9.52e-2, 9.07e-2, 9.86e-2],
    [55000.0, 6.0, 9.12e-2, 8.92e-2, 9.39e-2],
    [75000.0, 6.0, 8.48e-2, 8.64e-2, 8.98e-2],
    [95000.0, 6.0, 7.61e-2, 8.30e-2, 8.46e-2],
    [115000.0, 6.0, 7.05e-2, 7.96e-2, 8.04e-2],
    [135000.0, 7.0, 6.99e-2, 7.84e-2, 7.82e-2],
    [155000.0, 7.0, 6.70e-2, 7.45e-2, 7.40e-2],
    [175000.0, 7.0, 6.49e-2, 7.03e-2, 7.07e-2],
    [195000.0, 7.0, 5.88e-2, 6.74e-2, 6.80e-2],
    [215000.0, 7.0, 5.63e-2, 6.46e-2, 6.57e-2],
    [235000.0, 7.0, 5.30e-2, 6.28e-2, 6.37e-2],
    [255000.0, 7.0, 5.05e-2, 6.19e-2, 6.24e-2],
    [275000.0, 8.0, 4.88e-2, 5.99e-2, 6.15e-2],
    [295000.0, 8.0, 4.58e-2, 5.74e-2, 6.04e-2],
    [315000.0, 8.0, 4.24e-2, 5.52e-2, 5.93e-2],
    [335000.0, 8.0, 3.86e-2, 5.24e-2, 5.70e-2],
    [355000.0, 8.0, 3.70e-2, 5.02e-2, 5.53e-2],
    [375000.0, 8.0, 3.55e-2, 4.88e-2, 5.36e-2],
    [395000.0, 8.0, 3.46e-2, 4.70e-2, 5.23e-2],
];

/// As [`TABLE5`] with the Guillas example-4 truncation.
pub const TABLE6: [[f64; 5]; 20] = [
    [15000.0, 2.0, 6.78e-2, 8.77e-2, 6.64e-2],
    [35000.0, 2.0, 6.72e-2, 8.61e-2, 6.30e-2],
    [55000.0, 2.0, 6.46e-2, 8.48e-2, 6.17e-2],
    [75000.0, 2.0, 6.24e-2, 8.20e-2, 5.76e-2],
    [95000.0, 2.0, 5.42e-2, 7.84e-2, 5.03e-2],
    [115000.0, 2.0, 4.84e-2, 7.34e-2, 4.56e-2],
    [135000.0, 2.0, 4.27e-2, 6.95e-2, 3.94e-2],
    [155000.0, 2.0, 3.64e-2, 6.60e-2, 3.65e-2],
    [175000.0, 3.0, 3.51e-2, 6.52e-2, 3.42e-2],
    [195000.0, 3.0, 3.38e-2, 6.16e-2, 3.24e-2],
    [215000.0, 3.0, 3.16e-2, 5.78e-2, 2.85e-2],
    [235000.0, 3.0, 2.98e-2, 5.53e-2, 2.60e-2],
    [255000.0, 3.0, 2.83e-2, 5.15e-2, 2.34e-2],
    [275000.0, 3.0, 2.50e-2, 4.85e-2, 2.05e-2],
    [295000.0, 3.0, 2.23e-2, 4.46e-2, 1.83e-2],
    [315000.0, 3.0, 2.15e-2, 4.30e-2, 1.58e-2],
    [335000.0, 3.0, 2.06e-2, 4.14e-2, 1.40e-2],
    [355000.0, 3.0, 1.98e-2, 3.95e-2, 1.24e-2],
    [375000.0, 3.0, 1.89e-2, 3.77e-2, 1.05e-2],
    [395000.0, 3.0, 1.82e-2, 3.70e-2, 9.93e-3],
];

/// `n, kernel EMAE (h1), kernel EMAE (h2), penalized FPCA EMAE`.
pub const TABLE7: [[f64; 4]; 13] = [
    [750.0, 8.57e-2, 8.85e-2, 8.99e-2],
    [1250.0, 7.67e-2, 8.43e-2, 8.69e-2],
    [1750.0, 7.15e-2, 7.12e-2, 8.05e-2],
    [2250.0, 7.09e-2, 6.87e-2, 7.59e-2],
    [2750.0, 6.87e-2, 6.67e-2, 7.31e-2],
    [3250.0, 6.52e-2, 5.92e-2, 7.28e-2],
    [3750.0, 6.20e-2, 5.56e-2, 7.13e-2],
    [4250.0, 6.06e-2, 5.32e-2, 7.06e-2],
    [4750.0, 5.67e-2, 5.25e-2, 6.47e-2],
    [5250.0, 5.24e-2, 5.12e-2, 6.08e-2],
    [5750.0, 5.01e-2, 4.82e-2, 5.75e-2],
    [6250.0, 4.90e-2, 4.49e-2, 5.33e-2],
    [6750.0, 4.87e-2, 3.87e-2, 4.97e-2],
];

/// `n, k1, componentwise, wavelet, k2, componentwise, wavelet` with `k1 = n^(1/6)`, `k2 = n^(1/10)`.
pub const TABLE8: [[f64; 7]; 13] = [
    [750.0, 3.0, 0.0702, 0.0911, 1.0, 0.0636, 0.0589],
    [1250.0, 3.0, 0.0550, 0.0873, 2.0, 0.0509, 0.0429],
    [1750.0, 3.0, 0.0473, 0.0803, 2.0, 0.0455, 0.0394],
    [2250.0, 3.0, 0.0414, 0.0795, 2.0, 0.0409, 0.0377],
    [2750.0, 3.0, 0.0365, 0.0734, 2.0, 0.0355, 0.0349],
    [3250.0, 3.0, 0.0343, 0.0719, 2.0, 0.0333, 0.0307],
    [3750.0, 3.0, 0.0330, 0.0675, 2.0, 0.0325, 0.0293],
    [4250.0, 4.0, 0.0328, 0.0672, 2.0, 0.0313, 0.0286],
    [4750.0, 4.0, 0.0317, 0.0664, 2.0, 0.0309, 0.0256],
    [5250.0, 4.0, 0.0309, 0.0636, 2.0, 0.0276, 0.0229],
    [5750.0, 4.0, 0.0298, 0.0598, 2.0, 0.0203, 0.0196],
    [6250.0, 4.0, 0.0283, 0.0583, 2.0, 0.0166, 0.0153],
    [6750.0, 4.0, 0.0276, 0.0555, 2.0, 0.0148, 0.0137],
];

/// `n, k_n, componentwise, Bosq, Guillas` prediction errors, banded non-diagonal model.
pub const TABLE9: [[f64; 5]; 20] = [
    [15000.0, 4.0, 0.5812, 8.94e-2, 0.1055],
    [35000.0, 5.0, 0.5604, 7.05e-2, 9.49e-2],
    [55000.0, 6.0, 0.5480, 6.67e-2, 9.14e-2],
    [75000.0, 6.0, 0.5322, 6.24e-2, 8.85e-2],
    [95000.0, 6.0, 0.5115, 5.89e-2, 8.47e-2],
    [115000.0, 6.0, 0.4975, 5.62e-2, 8.04e-2],
    [135000.0, 7.0, 0.4946, 5.57e-2, 7.66e-2],
    [155000.0, 7.0, 0.4810, 5.28e-2, 7.24e-2],
    [175000.0, 7.0, 0.4735, 5.01e-2, 6.78e-2],
    [195000.0, 7.0, 0.4608, 4.90e-2, 6.30e-2],
    [215000.0, 7.0, 0.4424, 4.69e-2, 6.07e-2],
    [235000.0, 7.0, 0.4250, 4.45e-2, 5.82e-2],
    [255000.0, 7.0, 0.4106, 4.25e-2, 5.54e-2],
    [275000.0, 8.0, 0.4080, 4.14e-2, 5.16e-2],
    [295000.0, 8.0, 0.3808, 4.09e-2, 4.81e-2],
    [315000.0, 8.0, 0.3604, 3.85e-2, 4.53e-2],
    [335000.0, 8.0, 0.3489, 3.56e-2, 4.29e-2],
    [355000.0, 8.0, 0.3302, 3.29e-2, 3.98e-2],
    [375000.0, 8.0, 0.3204, 2.90e-2, 3.75e-2],
    [395000.0, 8.0, 0.3177, 2.62e-2, 3.44e-2],
];
