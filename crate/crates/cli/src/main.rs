fn main() {
    std::process::exit(hdrcloudseg_cli::main_with_args(std::env::args_os()));
}
