fn main() {
    std::process::exit(ci_porter::run(std::env::args_os()));
}
