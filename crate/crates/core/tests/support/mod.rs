pub mod prox_oracle;
