fn main() {
    std::process::exit(arw_core::expcli::main_with_args(std::env::args_os()));
}
