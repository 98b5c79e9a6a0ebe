pub mod fla;
pub mod ft;
pub mod model;
pub mod rules;
pub mod test;
