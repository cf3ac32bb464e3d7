pub mod enumeration;
pub mod graph;
pub mod kontsevich;
pub mod linalg;
pub mod moduli_maps;
pub mod plane;
